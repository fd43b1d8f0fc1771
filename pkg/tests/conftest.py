import pytest

from levyspde.green import OperatorSpec
from levyspde.kernels import HeatKernel
from levyspde.noise import Gamma

# acceptance verdict lines, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def heat1():
    return OperatorSpec("heat", 1)


@pytest.fixture
def wave1():
    return OperatorSpec("wave", 1)


@pytest.fixture
def heat_kernel():
    return HeatKernel(1.0)


@pytest.fixture
def gamma11():
    return Gamma(1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
