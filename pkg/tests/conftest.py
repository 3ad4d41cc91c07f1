import numpy as np
import pytest

from kvn.grid import GridSpec, build_grid, gaussian_packet


@pytest.fixture(scope="session")
def grid64():
    """1-d configuration grid, 64 x 64, x in [-10, 10), v in [-5, 5)."""
    return build_grid(GridSpec(1, (64, 64), (-10.0, 10.0), (-5.0, 5.0)))


@pytest.fixture(scope="session")
def grid2d():
    """2-d configuration grid, 16 points per axis, all extents [-8, 8)."""
    return build_grid(GridSpec.uniform(2, 16, ((-8.0, 8.0),) * 2, ((-8.0, 8.0),) * 2))


@pytest.fixture(scope="session")
def packet(grid64):
    return gaussian_packet(grid64, (0.0, 2.0), (0.5, 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


#: One verdict line per acceptance criterion, printed in the terminal summary.
CRITERIA_LINES = []


@pytest.fixture(scope="session")
def criterion():
    """``criterion(number, title, passed, detail)`` records and prints one verdict line."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        CRITERIA_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
