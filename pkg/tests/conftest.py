import numpy as np
import pytest

from pwave_vortex.classical import solve_classical
from pwave_vortex.radial import build_grid
from pwave_vortex.solver import ContinuationConfig, continue_in_t

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def classical60():
    return solve_classical(build_grid(60.0, 6000), tol=1e-10)


@pytest.fixture(scope="session")
def classical_small():
    return solve_classical(build_grid(20.0, 800), tol=1e-10)


@pytest.fixture(scope="session")
def family100():
    """t = 0 -> 1 in steps of 0.05 on R = 100, N = 10^4 with asymptotic outer data."""
    grid = build_grid(100.0, 10000)
    return continue_in_t(grid, ContinuationConfig(), solve_classical(grid))


@pytest.fixture(scope="session")
def family_small():
    grid = build_grid(20.0, 800)
    return continue_in_t(grid, ContinuationConfig(), solve_classical(grid))


def member(family, t):
    for tm, p, rep in family:
        if abs(tm - t) < 1e-9:
            return p, rep
    raise KeyError(t)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
