"""Exception hierarchy shared across the package."""


class LBMError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(LBMError, ValueError):
    pass


class FormatError(LBMError, ValueError):
    """Malformed tensor file."""


class SingularityError(LBMError, ValueError):
    """Drift requested too close to t = 1."""


class ScheduleError(LBMError, ValueError):
    pass


class ConfigError(LBMError, ValueError):
    pass


class DivergenceError(LBMError, RuntimeError):
    pass
