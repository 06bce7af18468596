"""Training timestep laws and the matching inference grids.

Config strings::

    uniform                          U[0, 0.99]
    discrete:4                       uniform over {0, 1/4, 2/4, 3/4}
    weighted:0@0.9,0.25@0.025,...    t@probability pairs
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lbm.core import RngStream
from lbm.errors import ConfigError, ScheduleError

UNIFORM_MAX = 0.99


@dataclass(frozen=True)
class TimestepDistribution:
    kind: str  # "uniform" | "discrete" | "weighted"
    support: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    _spec: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "uniform":
            return
        if self.kind not in ("discrete", "weighted"):
            raise ScheduleError(f"unknown timestep distribution kind {self.kind!r}")
        if not self.support:
            raise ScheduleError("discrete timestep distribution has empty support")
        if len(self.support) != len(self.weights):
            raise ScheduleError("support and weights differ in length")
        s = np.asarray(self.support)
        if np.any(np.diff(s) <= 0):
            raise ScheduleError(f"support must be strictly increasing: {self.support}")
        if s[0] < 0 or s[-1] > UNIFORM_MAX:
            raise ScheduleError(f"support must lie in [0, {UNIFORM_MAX}]: {self.support}")
        w = np.asarray(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ScheduleError(f"weights must be nonnegative and sum to 1: {self.weights}")

    @classmethod
    def uniform(cls) -> "TimestepDistribution":
        return cls("uniform", _spec="uniform")

    @classmethod
    def discrete(cls, k: int) -> "TimestepDistribution":
        if k < 1:
            raise ScheduleError(f"discrete:k needs k >= 1, got {k}")
        return cls("discrete", tuple(i / k for i in range(k)), (1.0 / k,) * k, _spec=f"discrete:{k}")

    @classmethod
    def weighted(cls, pairs: dict[float, float]) -> "TimestepDistribution":
        items = sorted(pairs.items())
        spec = "weighted:" + ",".join(f"{t:g}@{w:g}" for t, w in items)
        return cls("weighted", tuple(t for t, _ in items), tuple(w for _, w in items), _spec=spec)

    @property
    def is_discrete(self) -> bool:
        return self.kind != "uniform"

    def contains(self, t) -> np.ndarray:
        """Elementwise membership of ``t`` in the support (always true for uniform)."""
        t = np.asarray(t, dtype=np.float64)
        if not self.is_discrete:
            return (t >= 0) & (t <= UNIFORM_MAX)
        return np.isin(t, np.asarray(self.support))

    def to_spec(self) -> str:
        if self._spec:
            return self._spec
        if self.kind == "uniform":
            return "uniform"
        return "weighted:" + ",".join(f"{t:g}@{w:g}" for t, w in zip(self.support, self.weights))

    def __str__(self) -> str:
        return self.to_spec()


def parse_timesteps(spec: str) -> TimestepDistribution:
    spec = spec.strip()
    try:
        if spec == "uniform":
            return TimestepDistribution.uniform()
        if spec.startswith("discrete:"):
            return TimestepDistribution.discrete(int(spec.split(":", 1)[1]))
        if spec.startswith("weighted:"):
            pairs = {}
            for item in spec.split(":", 1)[1].split(","):
                t, w = item.split("@")
                pairs[float(t)] = float(w)
            return TimestepDistribution.weighted(pairs)
    except (ValueError, ScheduleError) as exc:
        raise ConfigError(f"bad timestep distribution {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown timestep distribution {spec!r}; expected uniform, discrete:K or weighted:t@w,...")


def sample_t(dist: TimestepDistribution, n: int, stream: RngStream) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if dist.kind == "uniform":
        return stream.gen.uniform(0.0, UNIFORM_MAX, size=n)
    support = np.asarray(dist.support)
    if dist.kind == "discrete":
        return support[stream.gen.integers(0, len(support), size=n)]
    return support[stream.gen.choice(len(support), size=n, p=np.asarray(dist.weights))]


def _evenly_spaced(support: tuple[float, ...]) -> bool:
    k = len(support)
    return all(abs(s - i / k) < 1e-12 for i, s in enumerate(support))


def inference_grid(dist: TimestepDistribution, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation times and step sizes for an Euler run from t=0 to t=1.

    Discrete laws cap ``steps`` at the support size; a run with exactly
    that many steps reuses the training support.
    """
    if steps < 1:
        raise ScheduleError(f"steps must be >= 1, got {steps}")
    if dist.is_discrete:
        k = len(dist.support)
        if steps > k:
            raise ScheduleError(
                f"{steps} inference steps requested but the training distribution "
                f"{dist.to_spec()} only has {k} timesteps"
            )
        if steps == k and _evenly_spaced(dist.support):
            ts = np.asarray(dist.support, dtype=np.float64)
        else:
            ts = np.arange(steps, dtype=np.float64) / steps
    else:
        ts = np.arange(steps, dtype=np.float64) / steps
    dts = np.diff(np.append(ts, 1.0))
    return ts, dts
