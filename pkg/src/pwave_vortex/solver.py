"""Newton solves, continuation in t and R, and energy descent for the p-wave system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .asymptotics import boundary_values, expansion_coefficients
from .classical import ClassicalProfile, seed, solve_classical
from .errors import ContinuationStalled, InvalidArgument, NumericalBreakdown, SolverFailure, StepSizeFailure
from .radial import (
    ProfilePair,
    RadialGrid,
    SolveReport,
    build_grid,
    energy_radial,
    epot_renorm,
    jacobian,
    newton,
    residual,
    residual_raw,
    _trapezoid_weights,
)

log = logging.getLogger(__name__)

BC_MODES = ("asymptotic", "sharp")


@dataclass(frozen=True)
class ContinuationConfig:
    t_start: float = 0.0
    t_end: float = 1.0
    dt_init: float = 0.05
    dt_min: float = 1e-4
    newton_tol: float = 1e-10
    max_newton_iters: int = 30
    shrink: float = 0.5
    max_backtracks: int = 30
    bc: str = "asymptotic"

    def __post_init__(self):
        if not 0.0 <= self.t_start <= self.t_end <= 1.0:
            raise InvalidArgument("need 0 <= t_start <= t_end <= 1")
        if not 0.0 < self.dt_min <= self.dt_init:
            raise InvalidArgument("need 0 < dt_min <= dt_init")
        if not self.newton_tol > 0:
            raise InvalidArgument("newton_tol must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise InvalidArgument("shrink must lie in (0, 1)")
        if self.bc not in BC_MODES:
            raise InvalidArgument(f"bc must be one of {BC_MODES}")


@dataclass
class SolutionFamily:
    members: list = field(default_factory=list)

    def append(self, t: float, pair: ProfilePair, report: SolveReport) -> None:
        if self.members and t <= self.members[-1][0]:
            raise InvalidArgument("family members must have increasing t")
        self.members.append((t, pair, report))

    @property
    def ts(self) -> list:
        return [m[0] for m in self.members]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, k):
        return self.members[k]


def outer_data(t: float, R: float, bc: str = "asymptotic") -> tuple[float, float]:
    if bc == "sharp":
        return 1.0, 0.0
    return boundary_values(t, R)


def diagnostics(p: ProfilePair) -> dict:
    """Sign structure and a-priori bound quantities of a profile pair."""
    fm, fp = p.fm[1:-1], p.fp[1:-1]
    mod2 = p.fm**2 + p.fp**2
    r = p.grid.r
    twice_pot = 2.0 * float(np.sum(_trapezoid_weights(p.grid) * epot_renorm(p.fm, p.fp) * r))
    return {
        "fp_negative": bool(np.all(fp < 0)),
        "fm_in_unit_interval": bool(np.all((fm > 0) & (fm < 1))),
        "max_modulus_sq": float(mod2.max()),
        "twice_potential": twice_pot,
        "sup_fp": float(np.max(np.abs(p.fp))),
    }


def solve_pwave(grid: RadialGrid, t: float, init: ProfilePair, cfg: ContinuationConfig | None = None):
    """Damped Newton on the diagonalized system at coupling ``t``.

    The outer values of ``init`` are replaced by the configured boundary data.
    Returns ``(ProfilePair, SolveReport)``.
    """
    cfg = cfg or ContinuationConfig()
    if not 0.0 <= t <= 1.0:
        raise InvalidArgument("t must lie in [0, 1]")
    if init.grid != grid:
        raise InvalidArgument("init lives on a different grid")
    fm, fp = init.fm.copy(), init.fp.copy()
    fm[-1], fp[-1] = outer_data(t, grid.R, cfg.bc)
    start = ProfilePair(grid, fm, fp, t, init.n)
    return _newton_pair(start, cfg)


def _newton_pair(start: ProfilePair, cfg: ContinuationConfig):
    def fun(x):
        return residual(start.with_interior(x)).ravel()

    def jac(x):
        return jacobian(start.with_interior(x))

    x, report = newton(
        fun,
        jac,
        start.interior_vector,
        cfg.newton_tol,
        max_iter=cfg.max_newton_iters,
        shrink=cfg.shrink,
        max_backtracks=cfg.max_backtracks,
    )
    sol = start.with_interior(x)
    return sol, report.with_extras(t=sol.t, R=sol.grid.R, N=sol.grid.N, bc=cfg.bc, **diagnostics(sol))


def embed_classical(base: ClassicalProfile, t: float = 0.0) -> ProfilePair:
    return ProfilePair(base.grid, base.f, np.zeros_like(base.f), t)


def continue_in_t(grid: RadialGrid, cfg: ContinuationConfig, base: ClassicalProfile) -> SolutionFamily:
    """Predictor-corrector march in ``t`` starting from the embedded classical profile.

    The predictor extrapolates linearly through the last two members.  On a
    failed corrector the step is halved; :class:`ContinuationStalled` carries
    the partial family once the step would drop below ``cfg.dt_min``.
    """
    if base.grid != grid:
        raise InvalidArgument("base profile lives on a different grid")
    if not base.report.converged:
        raise InvalidArgument("base profile did not converge")
    family = SolutionFamily()
    sol, rep = solve_pwave(grid, cfg.t_start, embed_classical(base, cfg.t_start), cfg)
    family.append(cfg.t_start, sol, rep)
    t, dt = cfg.t_start, cfg.dt_init
    while t < cfg.t_end - 1e-12:
        t_next = round(min(t + dt, cfg.t_end), 12)
        guess = _predict(family, t_next)
        try:
            sol, rep = solve_pwave(grid, t_next, guess, cfg)
        except SolverFailure as exc:
            dt *= 0.5
            log.info("corrector failed at t=%.6g (%s); dt -> %.3g", t_next, exc, dt)
            if dt < cfg.dt_min:
                raise ContinuationStalled(f"step fell below dt_min at t={t:.6g}", family, exc.report) from exc
            continue
        family.append(t_next, sol, rep)
        log.debug("t=%.4f converged in %d iterations", t_next, rep.iterations)
        t = t_next
        dt = min(cfg.dt_init, 2.0 * dt)
    return family


def _predict(family: SolutionFamily, t_next: float) -> ProfilePair:
    t1, p1, _ = family[-1]
    if len(family) < 2:
        return p1.with_values(t=t_next)
    t0, p0, _ = family[-2]
    s = (t_next - t1) / (t1 - t0)
    fm = p1.fm + s * (p1.fm - p0.fm)
    fp = p1.fp + s * (p1.fp - p0.fp)
    return p1.with_values(fm, fp, t_next)


def tail_profile(grid: RadialGrid, t: float) -> ProfilePair:
    """Smooth initial guess with the right behaviour at 0 and the leading tail at R."""
    r = grid.r
    fm = seed(r)
    fp = -0.5 * t * r / (r * r + 1.0) ** 1.5
    return ProfilePair(grid, fm, fp, t)


def extend_domain(sol: ProfilePair, R_new: float, N_new: int, cfg: ContinuationConfig | None = None):
    """Re-solve on ``[0, R_new]`` starting from ``sol`` padded with the tail model.

    The report records ``cauchy_change``, the sup-norm change of ``f-`` and
    ``f+`` over the old interval ``[0, R_old]``.
    """
    cfg = cfg or ContinuationConfig()
    R_old = sol.grid.R
    if not R_new > R_old:
        raise InvalidArgument(f"R_new={R_new} must exceed the current radius {R_old}")
    grid = build_grid(R_new, N_new)
    r = grid.r
    model = expansion_coefficients(sol.t)
    inside = r <= R_old
    fm = np.where(inside, np.interp(r, sol.grid.r, sol.fm), model.w_minus(np.maximum(r, R_old)))
    fp = np.where(inside, np.interp(r, sol.grid.r, sol.fp), model.w_plus(np.maximum(r, R_old)))
    if cfg.bc == "sharp":
        # blend the sharp outer data linearly across the padding
        frac = np.clip((r - R_old) / (R_new - R_old), 0.0, 1.0)
        fm = np.where(inside, fm, (1 - frac) * sol.fm[-1] + frac)
        fp = np.where(inside, fp, (1 - frac) * sol.fp[-1])
    fm[0] = fp[0] = 0.0
    new, report = solve_pwave(grid, sol.t, ProfilePair(grid, fm, fp, sol.t, sol.n), cfg)
    back_m = np.interp(sol.grid.r, r, new.fm)
    back_p = np.interp(sol.grid.r, r, new.fp)
    change = max(np.max(np.abs(back_m - sol.fm)), np.max(np.abs(back_p - sol.fp)))
    return new, report.with_extras(R_previous=R_old, cauchy_change=float(change))


def gradient_flow(
    grid: RadialGrid,
    t: float,
    init: ProfilePair,
    steps: int,
    dt_flow: float,
    trace: list | None = None,
    rel_slack: float = 1e-13,
) -> ProfilePair:
    """Explicit L^2(r dr) descent on the discrete energy with Dirichlet ends fixed.

    Each step is ``f <- f - dt_flow * 2 * residual_raw(f)``, which is the
    discrete gradient divided by the lumped mass ``r_i h``.  Raises
    :class:`StepSizeFailure` as soon as the energy increases.
    """
    if init.grid != grid:
        raise InvalidArgument("init lives on a different grid")
    if dt_flow <= 0 or steps < 0:
        raise InvalidArgument("need dt_flow > 0 and steps >= 0")
    p = init.with_values(t=t)
    fm, fp = p.fm.copy(), p.fp.copy()
    energy = energy_radial(p).total
    if trace is not None:
        trace.append(energy)
    for k in range(steps):
        raw = residual_raw(ProfilePair(grid, fm, fp, t, p.n))
        fm[1:-1] -= 2.0 * dt_flow * raw[:, 0]
        fp[1:-1] -= 2.0 * dt_flow * raw[:, 1]
        if not (np.all(np.isfinite(fm)) and np.all(np.isfinite(fp))):
            raise StepSizeFailure(f"flow blew up at step {k}; dt_flow={dt_flow} too large")
        new_energy = energy_radial(ProfilePair(grid, fm, fp, t, p.n)).total
        if new_energy > energy + rel_slack * abs(energy):
            raise StepSizeFailure(f"energy increased at step {k} ({energy!r} -> {new_energy!r}); dt_flow too large")
        energy = new_energy
        if trace is not None:
            trace.append(energy)
    return ProfilePair(grid, fm, fp, t, p.n)


def polish(p: ProfilePair, cfg: ContinuationConfig | None = None):
    """Newton-polish a pair keeping its own outer values."""
    return _newton_pair(p, cfg or ContinuationConfig())


def solve_general_degree(grid: RadialGrid, n: int, cfg: ContinuationConfig | None = None, t: float = 1.0):
    """Exploratory solve for degrees ``(n, n + 2)`` with outer data ``(1, 0)``.

    Marches in ``t`` from the decoupled problem whose ``f-`` is the degree
    ``|n|`` scalar profile.  Both components are pinned to 0 at the origin.
    The report carries ``exploratory: True``; nothing here is a theorem check.
    """
    cfg = replace(cfg or ContinuationConfig(), bc="sharp")
    base = solve_classical(grid, tol=cfg.newton_tol, degree=abs(int(n)))
    fm = base.f.copy()
    fm[-1] = 1.0
    pair = ProfilePair(grid, fm, np.zeros_like(fm), 0.0, int(n))
    sol, rep = _newton_pair(pair, cfg)
    ts = np.linspace(0.0, t, max(2, int(np.ceil(t / cfg.dt_init)) + 1))[1:]
    prev = None
    total_iters = rep.iterations
    for tk in ts:
        guess = sol.with_values(t=float(tk))
        if prev is not None:
            guess = guess.with_values(fm=2 * sol.fm - prev.fm, fp=2 * sol.fp - prev.fp)
        try:
            new, rep = _newton_pair(guess, cfg)
        except SolverFailure as exc:
            report = exc.report.with_extras(exploratory=True, n=int(n), t_reached=sol.t) if exc.report else None
            raise SolverFailure(f"degree {n}: corrector failed at t={tk:.4g}", report) from exc
        prev, sol = sol, new
        total_iters += rep.iterations
    return sol, replace(rep, iterations=total_iters).with_extras(exploratory=True, n=int(n))

