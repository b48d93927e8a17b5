import numpy as np
import pytest

from siginvert.path_model import PiecewiseLinearPath

#: one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def l_path():
    return PiecewiseLinearPath([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])


@pytest.fixture
def line34():
    return PiecewiseLinearPath([[0.0, 0.0], [3.0, 4.0]])
