"""Second variation at t = 0 and the first-order response ``h = d f+/dt``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .classical import ClassicalProfile
from .errors import InvalidArgument, NumericalBreakdown
from .radial import RadialGrid, SolveReport, _frozen, _laplacian, _trapezoid_weights

POTENTIALS = {"minus": lambda f: 3.0 * f * f - 1.0, "plus": lambda f: 2.0 * f * f - 1.0}


@dataclass(frozen=True, eq=False)
class WeightedOperator:
    """``-Lap_r + 1/r^2 + V`` with homogeneous Dirichlet ends.

    ``stiffness_diag``/``stiffness_off`` hold the symmetric tridiagonal
    matrix ``K = diag(r_i h) A`` over interior nodes; ``mass`` is ``r_i h``.
    """

    grid: RadialGrid
    V: np.ndarray
    stiffness_diag: np.ndarray
    stiffness_off: np.ndarray
    mass: np.ndarray

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """``A phi`` at interior nodes (phi given on interior nodes)."""
        out = self.stiffness_diag * phi
        out[:-1] += self.stiffness_off * phi[1:]
        out[1:] += self.stiffness_off * phi[:-1]
        return out / self.mass

    def dense_stiffness(self) -> np.ndarray:
        return np.diag(self.stiffness_diag) + np.diag(self.stiffness_off, 1) + np.diag(self.stiffness_off, -1)


def build_operator(profile: ClassicalProfile, kind: str) -> WeightedOperator:
    """Assemble ``L-`` (``V = 3f^2 - 1``) or ``L+`` (``V = 2f^2 - 1``)."""
    if kind not in POTENTIALS:
        raise InvalidArgument(f"kind must be one of {sorted(POTENTIALS)}")
    g = profile.grid
    r, h = g.interior, g.h
    V = POTENTIALS[kind](profile.f[1:-1])
    diag = 2.0 * r / h + r * h * (1.0 / r**2 + V)
    off = -(r[:-1] + 0.5 * h) / h
    return WeightedOperator(g, _frozen(V), _frozen(diag), _frozen(off), _frozen(r * h))


def _check_dirichlet(phi, size):
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (size,):
        raise InvalidArgument(f"test function must have length {size}")
    if phi[0] != 0.0 or phi[-1] != 0.0:
        raise InvalidArgument("test function must vanish at both grid ends")
    return phi


def _quadratic_form(grid: RadialGrid, phi: np.ndarray, V: np.ndarray | None) -> float:
    r, h = grid.r, grid.h
    w = _trapezoid_weights(grid)
    rmid = r[:-1] + 0.5 * h
    grad = np.sum((np.diff(phi) / h) ** 2 * rmid) * h
    zeroth = np.zeros_like(phi)
    zeroth[1:] = phi[1:] ** 2 / r[1:]
    if V is not None:
        zeroth = zeroth + V * phi**2 * r
    return float(grad + np.sum(w * zeroth))


def q0_value(profile: ClassicalProfile, phi) -> float:
    """Discrete ``Q0[phi]`` for ``phi = (phi-, phi+)`` given on all nodes."""
    size = profile.grid.N + 1
    phi_m, phi_p = (_check_dirichlet(c, size) for c in phi)
    f = profile.f
    return _quadratic_form(profile.grid, phi_m, 3.0 * f * f - 1.0) + _quadratic_form(
        profile.grid, phi_p, 2.0 * f * f - 1.0
    )


def l2_norm_sq(grid: RadialGrid, phi) -> float:
    """``int phi^2 r dr`` by the trapezoid rule, summed over components."""
    w = _trapezoid_weights(grid) * grid.r
    return float(sum(np.sum(w * np.asarray(c) ** 2) for c in phi))


@dataclass(frozen=True)
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    positive_definite: bool


def smallest_eigenvalue(op: WeightedOperator, tol: float = 1e-10, max_iter: int = 20000) -> EigenResult:
    """Bottom of the spectrum of ``K x = lam M x`` by inverse power iteration.

    ``K - sigma M`` is Cholesky-factored once.  ``sigma = 0`` when ``K`` is
    positive definite (the factorization itself certifies this), otherwise
    ``sigma = min(V)``, a lower bound for the spectrum.
    """
    d, e, m = op.stiffness_diag, op.stiffness_off, op.mass
    sigma, pd = 0.0, True
    try:
        chol = sla.cholesky_banded(np.vstack([np.r_[0.0, e], d]))
    except np.linalg.LinAlgError:
        pd = False
        sigma = float(op.V.min()) - 1.0
        chol = sla.cholesky_banded(np.vstack([np.r_[0.0, e], d - sigma * m]))

    def k_apply(x):
        y = d * x
        y[:-1] += e * x[1:]
        y[1:] += e * x[:-1]
        return y

    x = np.sin(np.pi * np.arange(1, d.size + 1) / (d.size + 1))
    x /= np.sqrt(np.sum(m * x * x))
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        y = sla.cho_solve_banded((chol, False), m * x)
        if not np.all(np.isfinite(y)):
            raise NumericalBreakdown("inverse iteration produced non-finite values")
        x = y / np.sqrt(np.sum(m * y * y))
        lam = float(x @ k_apply(x))
        if abs(lam - lam_old) <= tol * max(abs(lam), 1e-300):
            return EigenResult(lam, x, it, pd)
        lam_old = lam
    raise NumericalBreakdown(f"inverse iteration stalled after {max_iter} iterations (last value {lam})")


@dataclass(frozen=True, eq=False)
class HSolution:
    grid: RadialGrid
    h: np.ndarray
    report: SolveReport

    def __post_init__(self):
        object.__setattr__(self, "h", _frozen(self.h))

    @property
    def h_prime_0(self) -> float:
        """Second-order one-sided derivative at the origin."""
        h = self.h
        return float((-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * self.grid.h))


def h_outer_value(R: float) -> float:
    return -0.5 / R**2 - 13.0 / (4.0 * R**4)


def solve_h(profile: ClassicalProfile) -> HSolution:
    """Solve ``L+ h = -f(1 - f^2)/2`` with ``h(0) = 0`` and the tail value at R."""
    g = profile.grid
    f = profile.f
    op = build_operator(profile, "plus")
    rhs = -0.5 * f[1:-1] * (1.0 - f[1:-1] ** 2) * op.mass
    hR = h_outer_value(g.R)
    # coupling of the last interior row to the Dirichlet node N
    rhs[-1] += (g.R - 0.5 * g.h) / g.h * hR
    ab = np.vstack([np.r_[0.0, op.stiffness_off], op.stiffness_diag])
    try:
        hi = sla.solveh_banded(ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("L+ is singular or indefinite on this grid") from exc
    h = np.r_[0.0, hi, hR]
    res = -(_laplacian(h, g.r, g.h) - h[1:-1] / g.r[1:-1] ** 2) + (2 * f[1:-1] ** 2 - 1) * h[1:-1]
    res += 0.5 * f[1:-1] * (1 - f[1:-1] ** 2)
    final = float(np.max(np.abs(res)))
    report = SolveReport(True, 1, final, (final,), 0, float("nan"), {"h_min": float(hi.min()), "h_max_interior": float(hi.max())})
    return HSolution(g, h, report)


def g_curvature(hs: HSolution, profile: ClassicalProfile, r_max: float = 0.2) -> tuple[float, float]:
    """Fit ``g = h/f ~ g0 + c r^2 + d r^4`` on ``0 < r <= r_max``; returns ``(g0, c)``."""
    r = hs.grid.r
    mask = (r > 0) & (r <= r_max + 1e-12)
    g = hs.h[mask] / profile.f[mask]
    x = r[mask] ** 2
    coef, *_ = np.linalg.lstsq(np.column_stack([np.ones_like(x), x, x * x]), g, rcond=None)
    return float(coef[0]), float(coef[1])


def embedding_check(grid: RadialGrid, phi) -> float:
    """``sup|phi|^2 - int (phi'^2 + phi^2/r^2) r dr`` for one function or a pair."""
    comps = [np.asarray(phi, dtype=float)] if np.ndim(phi) == 1 else [np.asarray(c, dtype=float) for c in phi]
    for c in comps:
        if c.shape != (grid.N + 1,) or c[0] != 0.0:
            raise InvalidArgument("phi must have length N+1 and vanish at r = 0")
    sup_sq = max(float(np.max(c * c)) for c in comps)
    return sup_sq - sum(_quadratic_form(grid, c, None) for c in comps)
