"""Large-r behaviour of the p-wave profiles.

Closed-form tail coefficients, least-squares tail fits, analytic
sub/supersolution residuals and Pohozaev diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, Unsupported
from .radial import ProfilePair, epot_renorm, _trapezoid_weights


@dataclass(frozen=True)
class TailModel:
    """Truncated inverse-power expansions

    ``w-(r) = 1 + a-/r^2 + b-/r^4 + c- R^6/r^6``,
    ``w+(r) = t (a+/r^2 + b+/r^4 + c+ R^6/r^6)``.
    """

    t: float
    a_minus: float
    a_plus: float
    b_minus: float
    b_plus: float
    c_minus: float = 0.0
    c_plus: float = 0.0
    R_ref: float = 1.0

    @property
    def tau(self) -> float:
        return 1.0 - 0.25 * self.t**2

    def w_minus(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 + self.a_minus / r**2 + self.b_minus / r**4 + self.c_minus * (self.R_ref / r) ** 6

    def w_plus(self, r):
        r = np.asarray(r, dtype=float)
        return self.t * (self.a_plus / r**2 + self.b_plus / r**4 + self.c_plus * (self.R_ref / r) ** 6)

    def lap_minus(self, r):
        """Radial Laplacian of ``w-``; uses ``Lap r^-k = k^2 r^-(k+2)``."""
        r = np.asarray(r, dtype=float)
        return 4.0 * self.a_minus / r**4 + 16.0 * self.b_minus / r**6 + 36.0 * self.c_minus * self.R_ref**6 / r**8

    def lap_plus(self, r):
        r = np.asarray(r, dtype=float)
        return self.t * (
            4.0 * self.a_plus / r**4 + 16.0 * self.b_plus / r**6 + 36.0 * self.c_plus * self.R_ref**6 / r**8
        )

    def dw_minus(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 * self.a_minus / r**3 - 4.0 * self.b_minus / r**5 - 6.0 * self.c_minus * self.R_ref**6 / r**7

    def dw_plus(self, r):
        r = np.asarray(r, dtype=float)
        return self.t * (
            -2.0 * self.a_plus / r**3 - 4.0 * self.b_plus / r**5 - 6.0 * self.c_plus * self.R_ref**6 / r**7
        )

    def with_c(self, c_minus: float, c_plus: float, R_ref: float) -> "TailModel":
        return TailModel(self.t, self.a_minus, self.a_plus, self.b_minus, self.b_plus, c_minus, c_plus, R_ref)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "a_minus": self.a_minus,
            "a_plus": self.a_plus,
            "b_minus": self.b_minus,
            "b_plus": self.b_plus,
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
            "R_ref": self.R_ref,
        }


def order2_system(t: float):
    """Matrix and right-hand side of the r^-2 cancellation conditions for ``(a-, a+)``."""
    tau = 1.0 - 0.25 * t * t
    A = np.array([[2.0, -0.5 * t * t], [-1.0, 1.0]])
    rhs = np.array([-tau, 0.0])
    return A, rhs


def order4_system(t: float, a_minus: float, a_plus: float):
    """Matrix and right-hand side of the r^-4 cancellation conditions for ``(b-, b+)``."""
    tau = 1.0 - 0.25 * t * t
    t2 = t * t
    A = np.array([[2.0, -0.5 * t2], [-1.0, 1.0]])
    rhs = np.array(
        [
            3.0 * tau * a_minus - 3.0 * a_minus**2 + 2.0 * t2 * a_plus * a_minus - 2.0 * t2 * a_plus**2,
            3.0 * tau * a_plus + 1.5 * a_minus**2 + t2 * a_plus**2 - 4.0 * a_plus * a_minus,
        ]
    )
    return A, rhs


def expansion_coefficients(t: float) -> TailModel:
    """Solve the two 2x2 cancellation systems for ``a+-`` then ``b+-``."""
    t = float(t)
    a_minus, a_plus = np.linalg.solve(*order2_system(t))
    b_minus, b_plus = np.linalg.solve(*order4_system(t, a_minus, a_plus))
    return TailModel(t, float(a_minus), float(a_plus), float(b_minus), float(b_plus))


def boundary_values(t: float, R: float) -> tuple[float, float]:
    """Outer Dirichlet data ``(w-(R), w+(R))`` from the closed-form tail."""
    m = expansion_coefficients(t)
    return float(m.w_minus(R)), float(m.w_plus(R))


@dataclass(frozen=True)
class TailFit:
    window: tuple
    a_minus: float
    b_minus: float
    residual_minus: float
    a_plus: float = float("nan")
    b_plus: float = float("nan")
    residual_plus: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "fit_window": list(self.window),
            "fitted_a_minus": self.a_minus,
            "fitted_b_minus": self.b_minus,
            "fitted_a_plus": self.a_plus,
            "fitted_b_plus": self.b_plus,
            "residuals": {"minus": self.residual_minus, "plus": self.residual_plus},
        }


def _lstsq_inverse_powers(r, y):
    # columns scaled to unit size at r_lo for conditioning
    r0 = r[0]
    basis = np.column_stack([(r0 / r) ** 2, (r0 / r) ** 4])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    res = float(np.linalg.norm(basis @ coef - y))
    return coef[0] * r0**2, coef[1] * r0**4, res


def fit_tail(p: ProfilePair, window, fit_plus: bool | None = None) -> TailFit:
    """Least-squares fit of ``f- - 1`` and ``f+/t`` on ``{r^-2, r^-4}``."""
    r_lo, r_hi = map(float, window)
    g = p.grid
    if not 0 < r_lo < r_hi <= g.R * (1 + 1e-12):
        raise InvalidArgument(f"window {window} must satisfy 0 < r_lo < r_hi <= R={g.R}")
    mask = g.window(r_lo, r_hi)
    if mask.sum() < 20:
        raise InvalidArgument("fit window must contain at least 20 nodes")
    r = g.r[mask]
    if abs(p.fm[mask][0] - 1.0) >= 0.1:
        raise InvalidArgument("|f- - 1| >= 0.1 at the window start; move r_lo outward")
    if fit_plus is None:
        fit_plus = p.t > 0
    if fit_plus and p.t == 0:
        raise InvalidArgument("cannot fit f+/t at t = 0")
    am, bm, resm = _lstsq_inverse_powers(r, p.fm[mask] - 1.0)
    if not fit_plus:
        return TailFit((r_lo, r_hi), am, bm, resm)
    ap, bp, resp = _lstsq_inverse_powers(r, p.fp[mask] / p.t)
    return TailFit((r_lo, r_hi), am, bm, resm, ap, bp, resp)


def barrier_residuals(model: TailModel, r):
    """Analytic residuals ``(E-, E+)`` of the pair ``(w-, w+)``.

    ``E = tau(-Lap w + w/r^2) + w(2 w_other^2 + w^2 - 1) - t/2 w_other(2 w^2 + w_other^2 - 1)``.
    """
    r = np.asarray(r, dtype=float)
    t, tau = model.t, model.tau
    wm, wp = model.w_minus(r), model.w_plus(r)
    e_minus = (
        tau * (-model.lap_minus(r) + wm / r**2)
        + wm * (2.0 * wp**2 + wm**2 - 1.0)
        - 0.5 * t * wp * (2.0 * wm**2 + wp**2 - 1.0)
    )
    e_plus = (
        tau * (-model.lap_plus(r) + wp / r**2)
        + wp * (2.0 * wm**2 + wp**2 - 1.0)
        - 0.5 * t * wm * (2.0 * wp**2 + wm**2 - 1.0)
    )
    return e_minus, e_plus


@dataclass(frozen=True)
class BarrierCheck:
    kind: str
    delta: float
    R: float
    r: np.ndarray
    e_minus: np.ndarray
    e_plus: np.ndarray
    verdict: bool


def supersolution_residual(t: float, delta: float, R: float, samples: int = 2000, sub: bool = False) -> BarrierCheck:
    """Sample ``E+-`` on ``[R, 10R]`` for ``c- = delta, c+ = 2 delta`` (negated when ``sub``).

    The verdict is True iff both residuals are strictly positive
    (supersolution) or strictly negative (subsolution) at every sample.
    """
    if not 0.0 < delta < 1.0 / 32.0:
        raise InvalidArgument("delta must lie in (0, 1/32)")
    if R <= 0:
        raise InvalidArgument("R must be positive")
    sign = -1.0 if sub else 1.0
    model = expansion_coefficients(t).with_c(sign * delta, sign * 2.0 * delta, R)
    r = np.geomspace(R, 10.0 * R, samples)
    em, ep = barrier_residuals(model, r)
    if sub:
        ok = bool(np.all(em < 0) and np.all(ep < 0))
    else:
        ok = bool(np.all(em > 0) and np.all(ep > 0))
    return BarrierCheck("sub" if sub else "super", delta, float(R), r, em, ep, ok)


def find_validity_radius(t: float, delta: float, R_max: float = 1e4, sub: bool = False, rel_tol: float = 1e-3) -> float:
    """Smallest R (to ``rel_tol``) at which the barrier verdict holds, by bisection."""
    if not supersolution_residual(t, delta, R_max, sub=sub).verdict:
        raise InvalidArgument(f"barrier verdict fails even at R={R_max}")
    lo, hi = 1.0, R_max
    if supersolution_residual(t, delta, lo, sub=sub).verdict:
        return lo
    while hi - lo > rel_tol * hi:
        mid = np.sqrt(lo * hi)
        if supersolution_residual(t, delta, mid, sub=sub).verdict:
            hi = mid
        else:
            lo = mid
    return float(hi)


def pohozaev_function(p: ProfilePair, d_minus=None, d_plus=None):
    """``r^2 (f-'^2 + f+'^2 + f-' f+') - f-^2 - f+^2 - f- f+`` at every node."""
    r = p.grid.r
    if d_minus is None:
        d_minus = np.gradient(p.fm, r, edge_order=2)
    if d_plus is None:
        d_plus = np.gradient(p.fp, r, edge_order=2)
    return r**2 * (d_minus**2 + d_plus**2 + d_minus * d_plus) - p.fm**2 - p.fp**2 - p.fm * p.fp


@dataclass(frozen=True)
class PohozaevReport:
    mismatch: np.ndarray
    sup_mismatch: float
    twice_potential: float
    identity_derivative_reading: float
    identity_printed_reading: float
    identity_exact: float

    def to_dict(self) -> dict:
        return {
            "sup_mismatch": self.sup_mismatch,
            "twice_potential": self.twice_potential,
            "identity_derivative_reading": self.identity_derivative_reading,
            "identity_printed_reading": self.identity_printed_reading,
            "identity_exact": self.identity_exact,
        }


def pohozaev_residual(p: ProfilePair) -> PohozaevReport:
    """Compare ``P'`` with ``r^2 (e_pot)'`` node by node, plus integrated forms.

    The integrated quantities are

    * ``identity_derivative_reading``: ``2 int e r dr + R^2 (f-'^2 + f+'^2 + f-'f+')(R)``
    * ``identity_printed_reading``: ``2 int e r dr + R^2 (f-'^2 + f+'^2 + f-(R) f+(R))``
    * ``identity_exact``: ``2 int e r dr + P(R) - R^2 e(R)``

    The first two equal 1 in the continuum when ``f(R) = (1, 0)``; the last
    is ``P(0) = 0`` for any boundary data.
    """
    if p.t != 1.0:
        raise Unsupported("the Pohozaev identity is stated for t = 1 only")
    g = p.grid
    r = g.r
    dm = np.gradient(p.fm, r, edge_order=2)
    dp = np.gradient(p.fp, r, edge_order=2)
    P = pohozaev_function(p, dm, dp)
    e = epot_renorm(p.fm, p.fp)
    lhs = np.gradient(P, r, edge_order=2)
    rhs = r**2 * np.gradient(e, r, edge_order=2)
    mismatch = (lhs - rhs)[1:-1]
    twice_pot = 2.0 * float(np.sum(_trapezoid_weights(g) * e * r))
    R = g.R
    deriv_terms = dm[-1] ** 2 + dp[-1] ** 2 + dm[-1] * dp[-1]
    return PohozaevReport(
        mismatch=mismatch,
        sup_mismatch=float(np.max(np.abs(mismatch))),
        twice_potential=twice_pot,
        identity_derivative_reading=twice_pot + R**2 * deriv_terms,
        identity_printed_reading=twice_pot + R**2 * (dm[-1] ** 2 + dp[-1] ** 2 + p.fm[-1] * p.fp[-1]),
        identity_exact=twice_pot + P[-1] - R**2 * e[-1],
    )


@dataclass(frozen=True)
class DerivativeTailReport:
    window: tuple
    lead_minus: float
    lead_plus: float
    C_minus: float
    C_plus: float
    monotone_minus: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def derivative_tail_check(p: ProfilePair) -> DerivativeTailReport:
    """Fit ``r^3 f-'`` and ``r^3 f+'/t`` on ``[R/2, 0.9R]`` to ``A + C/r^2``.

    A differentiated tail ``-1/(2r^2)`` gives ``A = +1`` for both components.
    """
    g = p.grid
    r = g.r
    mask = g.window(0.5 * g.R, 0.9 * g.R)
    rw = r[mask]
    basis = np.column_stack([np.ones_like(rw), (rw[0] / rw) ** 2])
    ym = (r**3 * np.gradient(p.fm, r, edge_order=2))[mask]
    cm, *_ = np.linalg.lstsq(basis, ym, rcond=None)
    monotone = bool(np.all(np.diff(ym) <= 0) or np.all(np.diff(ym) >= 0))
    if p.t > 0:
        yp = (r**3 * np.gradient(p.fp, r, edge_order=2))[mask] / p.t
        cp, *_ = np.linalg.lstsq(basis, yp, rcond=None)
        lead_plus, C_plus = float(cp[0]), float(cp[1] * rw[0] ** 2)
    else:
        lead_plus, C_plus = float("nan"), float("nan")
    return DerivativeTailReport(
        (float(rw[0]), float(rw[-1])), float(cm[0]), lead_plus, float(cm[1] * rw[0] ** 2), C_plus, monotone
    )
