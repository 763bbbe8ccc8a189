import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from pwave_vortex.asymptotics import expansion_coefficients
from pwave_vortex.errors import InvalidArgument, UnsupportedDegree
from pwave_vortex.radial import (
    ProfilePair,
    build_grid,
    energy_radial,
    epot_renorm,
    jacobian,
    jacobian_raw,
    newton,
    residual,
    residual_raw,
)
from pwave_vortex.solver import ContinuationConfig, continue_in_t
from pwave_vortex.classical import solve_classical


def smooth_pair(grid, t, seed=0, n=-1):
    rng = np.random.default_rng(seed)
    r = grid.r
    c = rng.uniform(0.5, 1.5, 4)
    fm = np.tanh(c[0] * r) * (1 + 0.1 * np.sin(c[1] * r))
    fp = -c[2] * r * np.exp(-c[3] * r)
    fm[0] = fp[0] = 0.0
    return ProfilePair(grid, fm, fp, t, n)


# -- grid ----------------------------------------------------------------------


def test_grid_examples():
    g = build_grid(10, 1000)
    assert g.h == pytest.approx(0.01)
    assert g.r[500] == pytest.approx(5.0)
    assert build_grid(100, 10000).h == pytest.approx(0.01)
    assert g.r[0] == 0.0 and g.r[-1] == 10.0
    assert np.all(np.diff(g.r) > 0)


@pytest.mark.parametrize("R,N", [(1, 8), (0, 100), (-1, 100), (1, 15.5)])
def test_grid_guards(R, N):
    with pytest.raises(InvalidArgument):
        build_grid(R, N)


def test_profile_invariants():
    g = build_grid(1, 16)
    z = np.zeros(17)
    with pytest.raises(InvalidArgument):
        ProfilePair(g, np.ones(17), z, 0.5)
    with pytest.raises(InvalidArgument):
        ProfilePair(g, z[:-1], z[:-1], 0.5)
    with pytest.raises(InvalidArgument):
        ProfilePair(g, z, z, 1.5)
    p = ProfilePair(g, z, z, 0.5)
    with pytest.raises(ValueError):
        p.fm[3] = 1.0


# -- potential ---------------------------------------------------------------------


def test_epot_examples():
    assert epot_renorm(1, 0) == 0.0
    assert epot_renorm(0, 0) == 0.5
    assert epot_renorm(1, 1) == 1.5


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_epot_nonnegative(a, b):
    e = epot_renorm(a, b)
    assert e >= 0.0
    if e < 1e-14:
        assert min(abs(abs(a) - 1) + abs(b), abs(a) + abs(abs(b) - 1)) < 1e-6


def test_epot_zero_set():
    for a, b in [(1, 0), (-1, 0), (0, 1), (0, -1)]:
        assert epot_renorm(a, b) == 0.0
    assert epot_renorm(0.7071, 0.7071) > 0.2


# -- energy ----------------------------------------------------------------------


def test_zero_profile_energy():
    g = build_grid(7.0, 700)
    z = np.zeros(701)
    E = energy_radial(ProfilePair(g, z, z, 0.3))
    assert E.kinetic_diag == 0.0 and E.kinetic_cross == 0.0
    assert E.potential == pytest.approx(7.0**2 / 4, rel=1e-12)
    assert E.total == E.kinetic_diag + E.kinetic_cross + E.potential


def test_cross_term_vanishes_for_embedded_classical(classical_small):
    p = ProfilePair(classical_small.grid, classical_small.f, np.zeros_like(classical_small.f), 0.8)
    E = energy_radial(p)
    assert E.kinetic_cross == 0.0
    assert E.kinetic_diag > 0 and E.potential > 0


def test_energy_rejects_other_degrees():
    g = build_grid(5, 50)
    with pytest.raises(UnsupportedDegree):
        energy_radial(smooth_pair(g, 0.5, n=0))


def _midpoint_energy(p):
    r, h = p.grid.r, p.grid.h
    rm = r[:-1] + 0.5 * h
    a, b = 0.5 * (p.fm[1:] + p.fm[:-1]), 0.5 * (p.fp[1:] + p.fp[:-1])
    da, db = np.diff(p.fm) / h, np.diff(p.fp) / h
    dens = (da**2 + db**2 + (a * a + b * b) / rm**2) + p.t * (da + a / rm) * (db + b / rm) + epot_renorm(a, b)
    return float(np.sum(dens * rm) * h)


def _spline_energy(p):
    sm, sp_ = CubicSpline(p.grid.r, p.fm), CubicSpline(p.grid.r, p.fp)

    def dens(r):
        a, b, da, db = sm(r), sp_(r), sm(r, 1), sp_(r, 1)
        return ((da**2 + db**2 + (a * a + b * b) / r**2) + p.t * (da + a / r) * (db + b / r) + epot_renorm(a, b)) * r

    edges = np.linspace(0, p.grid.R, 201)
    return sum(quad(dens, max(lo, 1e-12), hi, limit=200, epsabs=1e-13)[0] for lo, hi in zip(edges[:-1], edges[1:]))


@pytest.fixture(scope="module")
def fine_t1():
    grid = build_grid(100.0, 20000)
    return continue_in_t(grid, ContinuationConfig(), solve_classical(grid))[-1][1]


def test_energy_against_midpoint_oracle(fine_t1):
    E = energy_radial(fine_t1).total
    assert np.isfinite(E)
    assert abs(E - _midpoint_energy(fine_t1)) / E <= 1e-6


def test_energy_against_spline_quadrature(fine_t1):
    E = energy_radial(fine_t1).total
    assert abs(E - _spline_energy(fine_t1)) / E <= 1e-6


def test_energy_second_order(family100, fine_t1):
    coarse = family100[-1][1]
    ref = _spline_energy(fine_t1)
    e1 = abs(energy_radial(coarse).total - ref)
    e2 = abs(energy_radial(fine_t1).total - ref)
    assert 3.0 < e1 / e2 < 5.0


def test_variational_consistency(rng):
    """Exact discrete gradient of the energy is ``2 r_i h`` times the raw residual."""
    g = build_grid(8.0, 200)
    p = smooth_pair(g, 0.7, seed=3)
    raw = residual_raw(p)
    w = 2.0 * g.interior * g.h
    for _ in range(3):
        v = rng.standard_normal((g.N - 1, 2))
        eps = 1e-6
        up = p.with_interior(p.interior_vector + eps * v.ravel())
        dn = p.with_interior(p.interior_vector - eps * v.ravel())
        fd = (energy_radial(up).total - energy_radial(dn).total) / (2 * eps)
        exact = float(np.sum(w[:, None] * raw * v))
        assert fd == pytest.approx(exact, rel=1e-7)


# -- residuals ------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.0, 0.4, 1.0])
def test_residual_of_constant_state(t):
    g = build_grid(200.0, 400)
    fm = np.ones(401)
    fm[0] = 0.0
    res = residual(ProfilePair(g, fm, np.zeros(401), t))
    r = g.interior[1:]
    assert np.allclose(res[1:, 0], (1 - t * t / 4) / r**2, rtol=1e-12, atol=0)
    assert np.all(res[1:, 1] == 0.0)


def test_residual_odd(rng):
    g = build_grid(10, 300)
    p = smooth_pair(g, 0.6, seed=1)
    q = p.with_values(-p.fm, -p.fp)
    assert np.allclose(residual(q), -residual(p), rtol=0, atol=1e-13)


@pytest.mark.parametrize("n", [-1, 0, 1, -3])
def test_raw_and_diagonalized_forms_agree(n):
    g = build_grid(10, 300)
    p = smooth_pair(g, 0.8, seed=2, n=n)
    raw = residual_raw(p)
    M = np.array([[1.0, -0.4], [-0.4, 1.0]])
    combined = raw @ M.T
    scale = np.abs(combined).max()
    assert np.abs(residual(p) - combined).max() <= 1e-12 * scale


def test_tail_model_residual_is_sixth_order():
    """Richardson-extrapolated discrete residual of ``(w-, w+)`` equals the analytic one, O(r^-6)."""
    from pwave_vortex.asymptotics import barrier_residuals

    t = 0.8
    model = expansion_coefficients(t)
    out = []
    for N in (2000, 4000):
        g = build_grid(50.0, N)
        r = g.r.copy()
        r[0] = 1.0
        fm, fp = model.w_minus(r), model.w_plus(r)
        fm[0] = fp[0] = 0.0
        res = residual(ProfilePair(g, fm, fp, t))
        mask = g.window(10, 40)[1:-1]
        out.append((g.interior[mask], res[mask]))
    r = out[0][0]
    fine_r, fine_res = out[1]
    sel = np.isin(np.round(fine_r, 9), np.round(r, 9))
    extrap = (4 * fine_res[sel] - out[0][1]) / 3
    em, ep = barrier_residuals(model, r)
    assert np.abs(extrap[:, 0] - em).max() <= 1e-3 * np.abs(em).max()
    assert np.abs(extrap[:, 1] - ep).max() <= 1e-3 * np.abs(ep).max()
    slope = np.polyfit(np.log(r), np.log(np.abs(extrap[:, 0])), 1)[0]
    assert slope == pytest.approx(-6, abs=0.15)


def test_newton_output_residual(family_small):
    for _, p, rep in family_small:
        assert rep.converged
        assert np.abs(residual(p)).max() <= 1e-10


# -- Jacobians ---------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0])
def test_jacobian_directional_derivative(t, rng):
    g = build_grid(12, 240)
    p = smooth_pair(g, t, seed=4)
    J = jacobian(p)
    x = p.interior_vector
    v = rng.standard_normal(x.size)
    Jv = J @ v
    errs = []
    for eps in (1e-6, 5e-7):
        fd = (residual(p.with_interior(x + eps * v)) - residual(p)).ravel() / eps
        errs.append(np.linalg.norm(fd - Jv))
    assert errs[0] <= 1e-4 * np.linalg.norm(Jv)
    assert errs[1] < errs[0]


def test_jacobian_decouples_at_t0_fp0():
    g = build_grid(10, 100)
    p = smooth_pair(g, 0.0, seed=5)
    p = p.with_values(fp=np.zeros_like(p.fp))
    J = jacobian(p).toarray()
    assert np.all(J[0::2, 1::2] == 0.0)
    assert np.all(J[1::2, 0::2] == 0.0)


def test_raw_jacobian_weighted_symmetry():
    """``diag(r h) J_raw`` is the Hessian of the energy, hence symmetric."""
    g = build_grid(10, 150)
    p = smooth_pair(g, 0.9, seed=6)
    J = jacobian_raw(p).toarray()
    w = np.repeat(g.interior * g.h, 2)
    H = w[:, None] * J
    assert np.abs(H - H.T).max() <= 1e-12 * np.abs(H).max()


def test_diagonalized_coupling_blocks_differ():
    """The diagonalized Jacobian is not symmetric: its coupling blocks scale differently."""
    g = build_grid(10, 150)
    p = smooth_pair(g, 0.9, seed=6)
    J = jacobian(p).toarray()
    assert not np.allclose(J[0::2, 1::2], J[1::2, 0::2])


# -- Newton helper ----------------------------------------------------------------------------


def test_newton_scalar_root():
    import scipy.sparse as sp

    x, rep = newton(lambda x: x**3 - 8.0, lambda x: sp.diags(3 * x**2).tocsr(), np.array([5.0]), 1e-12)
    assert rep.converged and x[0] == pytest.approx(2.0)
    assert rep.final_residual <= 1e-12
    assert len(rep.history) == rep.iterations + 1


# -- serialization --------------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    g = build_grid(3.3, 37)
    p = smooth_pair(g, 0.25, seed=7)
    path = tmp_path / "p.csv"
    text = p.to_csv(path)
    assert text.splitlines()[0] == "r,f_minus,f_plus"
    q = ProfilePair.from_csv(path, 0.25)
    assert q.grid == g
    assert np.array_equal(q.fm, p.fm) and np.array_equal(q.fp, p.fp)
    assert q.to_csv() == text


def test_reports_serialize(family_small, tmp_path):
    import json

    from pwave_vortex.radial import write_json

    _, p, rep = family_small[-1]
    write_json(tmp_path / "r.json", {"solve": rep.to_dict(), "energy": energy_radial(p).to_dict()})
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["solve"]["converged"] is True
    assert d["energy"]["total"] == pytest.approx(energy_radial(p).total)
