import numpy as np
import pytest

from pwave_vortex.classical import classical_residual, outer_value, seed, solve_classical
from pwave_vortex.errors import InvalidArgument, SolverFailure
from pwave_vortex.radial import build_grid


def tail_fit(prof, lo, hi):
    g = prof.grid
    m = g.window(lo, hi)
    r = g.r[m]
    A = np.column_stack([(lo / r) ** 2, (lo / r) ** 4])
    c, *_ = np.linalg.lstsq(A, prof.f[m] - 1.0, rcond=None)
    return c[0] * lo**2, c[1] * lo**4


def test_converges(classical60):
    rep = classical60.report
    assert rep.converged
    assert rep.final_residual <= 1e-10
    assert np.abs(classical_residual(classical60.grid, classical60.f)).max() <= 1e-10


def test_boundary_values(classical60):
    assert classical60.f[0] == 0.0
    assert classical60.f[-1] == pytest.approx(1 - 1 / (2 * 60**2) - 9 / (8 * 60**4), abs=0)
    assert classical60.f[-1] < 1.0


def test_tail_coefficients(classical60):
    a, b = tail_fit(classical60, 30, 54)
    assert a == pytest.approx(-0.5, rel=0.02)
    assert b == pytest.approx(-9 / 8, rel=0.10)


def test_bounded_and_monotone(classical60):
    f = classical60.f
    assert np.all((f[1:-1] > 0) & (f[1:-1] < 1))
    assert np.diff(f).min() > 0
    assert classical60.report.extras["min_increment"] > 0
    assert classical60.report.extras["bounded"]


def test_second_order_convergence():
    R = 15.0
    ref = solve_classical(build_grid(R, 4800))
    errs = []
    for N in (600, 1200):
        p = solve_classical(build_grid(R, N))
        stride = 4800 // N
        errs.append(np.abs(p.f - ref.f[::stride]).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_seed_limits():
    r = np.array([0.0, 1e-6, 1e6])
    s = seed(r)
    assert s[0] == 0.0 and s[1] == pytest.approx(1e-6 / np.sqrt(2)) and s[2] == pytest.approx(1.0)


def test_outer_value_matches_tail():
    assert outer_value(10.0) == pytest.approx(1 - 0.005 - 9 / 80000)


def test_guards():
    with pytest.raises(InvalidArgument):
        solve_classical(build_grid(10, 100), tol=0.0)
    with pytest.raises(SolverFailure) as info:
        solve_classical(build_grid(10, 100), tol=1e-30, max_iter=3)
    assert info.value.report is not None and not info.value.report.converged
