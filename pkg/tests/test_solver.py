import numpy as np
import pytest
from scipy.ndimage import gaussian_filter1d

from conftest import member
from pwave_vortex.classical import solve_classical
from pwave_vortex.errors import ContinuationStalled, InvalidArgument, StepSizeFailure
from pwave_vortex.radial import ProfilePair, build_grid, energy_radial, residual
from pwave_vortex.solver import (
    ContinuationConfig,
    SolutionFamily,
    continue_in_t,
    diagnostics,
    embed_classical,
    extend_domain,
    gradient_flow,
    outer_data,
    polish,
    solve_general_degree,
    solve_pwave,
    tail_profile,
)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        ContinuationConfig(t_start=0.5, t_end=0.2)
    with pytest.raises(InvalidArgument):
        ContinuationConfig(dt_init=1e-5, dt_min=1e-4)
    with pytest.raises(InvalidArgument):
        ContinuationConfig(bc="neumann")
    with pytest.raises(InvalidArgument):
        ContinuationConfig(shrink=1.0)


def test_family_requires_increasing_t(classical_small):
    fam = SolutionFamily()
    p = embed_classical(classical_small)
    fam.append(0.1, p, None)
    with pytest.raises(InvalidArgument):
        fam.append(0.1, p, None)


def test_t0_reproduces_classical(classical60):
    g = classical60.grid
    sol, rep = solve_pwave(g, 0.0, embed_classical(classical60), ContinuationConfig())
    assert rep.converged and rep.iterations <= 2
    assert np.abs(sol.fp).max() <= 1e-12
    assert np.abs(sol.fm - classical60.f).max() <= 1e-10


def test_outer_data():
    assert outer_data(1.0, 100.0, "sharp") == (1.0, 0.0)
    fm, fp = outer_data(1.0, 10.0)
    assert fm == pytest.approx(1 - 0.5e-2 - 1.75e-4)
    assert fp == pytest.approx(-0.5e-2 - 3.25e-4)


def test_t1_family_member(family100):
    t, p, rep = family100[-1]
    assert t == 1.0 and rep.converged
    assert rep.final_residual <= 1e-10
    # conjectured regime: reported by the solver, checked here as an observation
    assert rep.extras["fp_negative"] and rep.extras["fm_in_unit_interval"]


def test_perturbed_initial_guess(classical60):
    g = classical60.grid
    cfg = ContinuationConfig(t_end=0.1)
    ref = continue_in_t(g, cfg, classical60)[-1][1]
    rng = np.random.default_rng(7)
    noise = np.array([gaussian_filter1d(rng.standard_normal(g.N + 1), 40) for _ in range(2)])
    noise *= 0.05 / np.abs(noise).max()
    noise[:, 0] = noise[:, -1] = 0.0
    init = ProfilePair(g, classical60.f + noise[0], noise[1], 0.1)
    sol, rep = solve_pwave(g, 0.1, init, cfg)
    assert rep.converged
    assert max(np.abs(sol.fm - ref.fm).max(), np.abs(sol.fp - ref.fp).max()) <= 1e-8


def test_short_continuation(classical60):
    fam = continue_in_t(classical60.grid, ContinuationConfig(t_end=0.2, dt_init=0.05), classical60)
    assert fam.ts == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    assert all(rep.converged for _, _, rep in fam)
    sup = [np.abs(p.fp).max() for _, p, _ in fam]
    assert np.all(np.diff(sup) > 0)


def test_empty_march(classical_small):
    fam = continue_in_t(classical_small.grid, ContinuationConfig(t_end=0.0), classical_small)
    assert len(fam) == 1
    assert np.abs(fam[0][1].fm - classical_small.f).max() <= 1e-12


def test_stalled_continuation_keeps_partial_family(classical_small):
    # t = 0 converges in at most two steps; the large jumps need more
    cfg = ContinuationConfig(t_end=1.0, dt_init=0.5, dt_min=0.4, max_newton_iters=2)
    with pytest.raises(ContinuationStalled) as info:
        continue_in_t(classical_small.grid, cfg, classical_small)
    fam = info.value.family
    assert len(fam) >= 1 and fam.ts[0] == 0.0
    assert info.value.report is not None and not info.value.report.converged


def test_a_priori_bounds(family100):
    for t, p, rep in family100:
        d = rep.extras
        assert d["max_modulus_sq"] <= 3.0
        if np.all(p.fm >= 0) and np.all(p.fp <= 0):
            assert d["max_modulus_sq"] <= 1.0 + 1e-3
        assert d["twice_potential"] <= 1.0 + 1e-3


def test_signs_small_t(family100):
    for t, p, rep in family100:
        if 0 < t <= 0.2:
            assert np.all(p.fp[1:-1] < 0)
            assert np.all((p.fm[1:-1] > 0) & (p.fm[1:-1] < 1))


def test_diagnostics_fields(family_small):
    d = diagnostics(family_small[-1][1])
    assert set(d) == {"fp_negative", "fm_in_unit_interval", "max_modulus_sq", "twice_potential", "sup_fp"}


# -- domain extension ------------------------------------------------------------------


@pytest.fixture(scope="module")
def extensions():
    out = {}
    for bc in ("asymptotic", "sharp"):
        cfg = ContinuationConfig(bc=bc)
        g = build_grid(50.0, 5000)
        p50 = continue_in_t(g, cfg, solve_classical(g))[-1][1]
        p100, r1 = extend_domain(p50, 100.0, 10000, cfg)
        p200, r2 = extend_domain(p100, 200.0, 20000, cfg)
        out[bc] = (p50, p100, r1, r2)
    return out


@pytest.mark.parametrize("bc", ["asymptotic", "sharp"])
def test_extension_interior_change(extensions, bc):
    p50, p100, r1, _ = extensions[bc]
    assert r1.converged and r1.extras["R_previous"] == 50.0
    m = p50.grid.window(0, 25)
    change = np.abs(np.interp(p50.grid.r[m], p100.grid.r, p100.fm) - p50.fm[m]).max()
    assert change <= 1e-3


def test_extension_cauchy_ratio_sharp(extensions):
    _, _, r1, r2 = extensions["sharp"]
    ratio = r2.extras["cauchy_change"] / r1.extras["cauchy_change"]
    assert ratio == pytest.approx(0.25, rel=0.1)


def test_extension_asymptotic_data_is_much_closer(extensions):
    assert extensions["asymptotic"][2].extras["cauchy_change"] < 1e-3 * extensions["sharp"][2].extras["cauchy_change"]


def test_extension_guard(family_small):
    p = family_small[-1][1]
    with pytest.raises(InvalidArgument):
        extend_domain(p, p.grid.R, 800)


# -- gradient flow --------------------------------------------------------------------------


def _flow_start(grid, t):
    p = tail_profile(grid, t)
    fm, fp = p.fm.copy(), p.fp.copy()
    fm[-1], fp[-1] = outer_data(t, grid.R)
    return p.with_values(fm, fp)


def test_flow_descends():
    g = build_grid(20.0, 200)
    init = _flow_start(g, 1.0)
    trace = []
    out = gradient_flow(g, 1.0, init, 3000, 0.1 * g.h**2, trace=trace)
    steps = np.diff(trace)
    assert np.all(steps <= 1e-13 * abs(trace[0]))
    assert trace[-1] < trace[0]
    assert np.abs(residual(out)).max() < np.abs(residual(init)).max()


def test_flow_then_polish_matches_newton(family_small):
    g = family_small[0][1].grid
    newton_sol, _ = member(family_small, 0.5)
    flowed = gradient_flow(g, 0.5, _flow_start(g, 0.5), 8000, 0.1 * g.h**2)
    polished, rep = polish(flowed, ContinuationConfig())
    assert rep.converged
    assert max(np.abs(polished.fm - newton_sol.fm).max(), np.abs(polished.fp - newton_sol.fp).max()) <= 1e-6
    assert energy_radial(newton_sol).total <= energy_radial(flowed).total + 1e-12


def test_flow_step_too_large():
    g = build_grid(20.0, 200)
    with pytest.raises(StepSizeFailure):
        gradient_flow(g, 0.5, _flow_start(g, 0.5), 10, 5 * g.h**2)


def test_flow_guards():
    g = build_grid(20.0, 200)
    with pytest.raises(InvalidArgument):
        gradient_flow(g, 0.5, _flow_start(g, 0.5), 10, -1.0)


# -- general degree -----------------------------------------------------------------------------


def test_general_degree_minus_one_matches():
    g = build_grid(30.0, 3000)
    cfg = ContinuationConfig(bc="sharp")
    sol, rep = solve_general_degree(g, -1, cfg)
    ref = continue_in_t(g, cfg, solve_classical(g))[-1][1]
    assert rep.extras["exploratory"] is True
    assert max(np.abs(sol.fm - ref.fm).max(), np.abs(sol.fp - ref.fp).max()) <= 1e-10


@pytest.mark.parametrize("n", [0, 1])
def test_general_degree_exploratory(n):
    from pwave_vortex.errors import SolverFailure

    g = build_grid(50.0, 5000)
    try:
        sol, rep = solve_general_degree(g, n, ContinuationConfig())
    except SolverFailure as exc:
        rep = exc.report
        assert rep is None or rep.extras.get("exploratory") is True
        return
    assert rep.extras["exploratory"] is True and rep.extras["n"] == n
    assert sol.n == n and sol.fm[-1] == 1.0 and sol.fp[-1] == 0.0
