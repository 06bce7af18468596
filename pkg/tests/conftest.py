import numpy as np
import pytest

from lbm.core import RngStream


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def stream():
    return RngStream(7)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
