"""Two-component complex energy on a disk in polar coordinates.

Nodes sit at ``(r_i, theta_j)`` with ``r_i = i h`` (``i = 0..N_r``) and
``theta_j = 2 pi j / N_theta``; ring 0 is the single centre node, stored as
``N_theta`` identical copies.  First derivatives are formed at the cell
midpoints ``r_{i+1/2}``: the radial one by the compact difference across the
cell, the angular one spectrally on each ring and averaged across the cell.
Both are exact for affine fields, so the kinetic kernel is reproduced to
rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import IllPosedBoundaryData, InvalidArgument, NumericalBreakdown, SolverFailure
from .radial import ProfilePair, SolveReport

FORMS = ("raw", "squares", "cartesian")


@dataclass(frozen=True)
class DiskGrid:
    R: float
    N_r: int
    N_theta: int

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidArgument("R must be positive")
        if self.N_r < 16:
            raise InvalidArgument("N_r must be >= 16")
        if self.N_theta < 32 or self.N_theta % 2:
            raise InvalidArgument("N_theta must be even and >= 32")

    @property
    def h(self) -> float:
        return self.R / self.N_r

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.N_theta

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.N_r + 1) * self.h

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.N_theta) * self.dtheta

    @property
    def r_mid(self) -> np.ndarray:
        return (np.arange(self.N_r) + 0.5) * self.h

    def mesh(self):
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def z(self) -> np.ndarray:
        rr, tt = self.mesh()
        return rr * np.exp(1j * tt)

    @property
    def wavenumbers(self) -> np.ndarray:
        k = np.fft.fftfreq(self.N_theta, 1.0 / self.N_theta)
        k[self.N_theta // 2] = 0.0
        return k

    def cell_weights(self) -> np.ndarray:
        """Area weights ``r_{i+1/2} h dtheta`` of the midpoint cells."""
        return np.repeat((self.r_mid * self.h * self.dtheta)[:, None], self.N_theta, axis=1)

    def node_weights(self) -> np.ndarray:
        """Trapezoid-in-r area weights; the centre carries zero weight."""
        w = self.r * self.h * self.dtheta
        w[-1] *= 0.5
        return np.repeat(w[:, None], self.N_theta, axis=1)

    def lumped_mass(self) -> np.ndarray:
        m = self.r * self.h * self.dtheta
        m[-1] *= 0.5
        m = np.repeat(m[:, None], self.N_theta, axis=1)
        m[0, :] = np.pi * (0.5 * self.h) ** 2
        return m


def _as_ring(g, grid: DiskGrid) -> np.ndarray:
    if callable(g):
        g = g(grid.theta)
    g = np.asarray(g, dtype=complex)
    if g.ndim == 0:
        g = np.full(grid.N_theta, complex(g))
    if g.shape != (grid.N_theta,):
        raise InvalidArgument(f"boundary data must have N_theta={grid.N_theta} samples")
    return g


@dataclass(frozen=True, eq=False)
class PlanarField:
    grid: DiskGrid
    eta_minus: np.ndarray
    eta_plus: np.ndarray
    g_minus: np.ndarray = None
    g_plus: np.ndarray = None

    def __post_init__(self):
        shape = (self.grid.N_r + 1, self.grid.N_theta)
        em = np.array(self.eta_minus, dtype=complex)
        ep = np.array(self.eta_plus, dtype=complex)
        if em.shape != shape or ep.shape != shape:
            raise InvalidArgument(f"fields must have shape {shape}")
        gm = em[-1].copy() if self.g_minus is None else _as_ring(self.g_minus, self.grid)
        gp = ep[-1].copy() if self.g_plus is None else _as_ring(self.g_plus, self.grid)
        if not (np.array_equal(em[-1], gm) and np.array_equal(ep[-1], gp)):
            raise InvalidArgument("rim values must equal the Dirichlet data")
        for a in (em, ep):
            if not np.all(a[0] == a[0, 0]):
                raise InvalidArgument("centre ring must hold a single value")
        for name, a in (("eta_minus", em), ("eta_plus", ep), ("g_minus", gm), ("g_plus", gp)):
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @classmethod
    def from_functions(cls, grid: DiskGrid, eta_minus, eta_plus) -> "PlanarField":
        """Sample callables of ``z`` on the mesh (centre from ``z = 0``)."""
        z = grid.z()
        z[0, :] = 0.0
        em = np.broadcast_to(np.asarray(eta_minus(z), dtype=complex), z.shape).copy()
        ep = np.broadcast_to(np.asarray(eta_plus(z), dtype=complex), z.shape).copy()
        return cls(grid, em, ep)

    @classmethod
    def from_radial(cls, p: ProfilePair, grid: DiskGrid) -> "PlanarField":
        """Equivariant embedding ``(f- e^{i n theta}, f+ e^{i (n+2) theta})``."""
        if abs(p.grid.R - grid.R) > 1e-12 * grid.R:
            raise InvalidArgument("radial and planar radii differ")
        rr, tt = grid.mesh()
        fm = np.interp(grid.r, p.grid.r, p.fm)[:, None]
        fp = np.interp(grid.r, p.grid.r, p.fp)[:, None]
        em = fm * np.exp(1j * p.n * tt)
        ep = fp * np.exp(1j * (p.n + 2) * tt)
        em[0, :] = fm[0, 0] if p.n == 0 else 0.0
        ep[0, :] = fp[0, 0] if p.n == -2 else 0.0
        return cls(grid, em, ep)

    def with_values(self, eta_minus, eta_plus) -> "PlanarField":
        return PlanarField(self.grid, eta_minus, eta_plus, self.g_minus, self.g_plus)

    def to_csv(self, path=None) -> str:
        rr, tt = self.grid.mesh()
        lines = ["r,theta,re_eta_minus,im_eta_minus,re_eta_plus,im_eta_plus"]
        for r, t, em, ep in zip(rr.ravel(), tt.ravel(), self.eta_minus.ravel(), self.eta_plus.ravel()):
            vals = (r, t, em.real, em.imag, ep.real, ep.imag)
            lines.append(",".join(repr(float(v)) for v in vals))
        text = "\n".join(lines) + "\n"
        if path is not None:
            from pathlib import Path

            Path(path).write_text(text)
        return text


# -- derivative operators ---------------------------------------------------


def _dtheta(grid: DiskGrid, eta: np.ndarray) -> np.ndarray:
    return np.fft.ifft(1j * grid.wavenumbers * np.fft.fft(eta, axis=-1), axis=-1)


def cartesian_derivatives(grid: DiskGrid, eta: np.ndarray):
    """``(d/dx, d/dy)`` of a complex nodal field at the midpoint cells."""
    dr = np.diff(eta, axis=0) / grid.h
    dt = _dtheta(grid, eta)
    at = 0.5 * (dt[:-1] + dt[1:]) / grid.r_mid[:, None]
    c, s = np.cos(grid.theta), np.sin(grid.theta)
    return c * dr - s * at, s * dr + c * at


def _cartesian_adjoint(grid: DiskGrid, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Transpose of :func:`cartesian_derivatives` applied to midpoint cotangents."""
    c, s = np.cos(grid.theta), np.sin(grid.theta)
    g_r = c * gx + s * gy
    g_t = (-s * gx + c * gy) / grid.r_mid[:, None]
    out = np.zeros((grid.N_r + 1, grid.N_theta), dtype=complex)
    out[1:] += g_r / grid.h
    out[:-1] -= g_r / grid.h
    half = np.zeros_like(out)
    half[:-1] += 0.5 * g_t
    half[1:] += 0.5 * g_t
    # spectral d/dtheta is antisymmetric
    out -= _dtheta(grid, half)
    return out


# -- densities ----------------------------------------------------------------


def _dot(a, b):
    return (a * np.conj(b)).real


def _wedge(a, b):
    return (np.conj(a) * b).imag


def _check_nu(nu):
    if not -1.0 < nu < 1.0:
        raise InvalidArgument("nu must lie in (-1, 1)")


def kinetic_from_derivatives(xp, yp, xm, ym, nu: float, form: str = "squares"):
    """Kinetic density from the Cartesian derivatives of ``eta+`` and ``eta-``."""
    _check_nu(nu)
    grad = abs(xp) ** 2 + abs(yp) ** 2 + abs(xm) ** 2 + abs(ym) ** 2
    if form == "raw":
        return grad + _dot(xp - 1j * yp, xm + 1j * ym) + nu * _dot(xp + 1j * yp, xm - 1j * ym)
    if form == "squares":
        a, b = 0.5 * (1.0 + nu), 0.5 * (1.0 - nu)
        return (
            a * abs(xp + xm) ** 2
            + a * abs(yp - ym) ** 2
            + b * abs(yp + 1j * xm) ** 2
            + b * abs(xp + 1j * ym) ** 2
        )
    if form == "cartesian":
        return (
            grad
            + (1.0 + nu) * (_dot(xp, xm) - _dot(yp, ym))
            + (1.0 - nu) * (_wedge(xm, yp) - _wedge(xp, ym))
        )
    raise InvalidArgument(f"form must be one of {FORMS}")


def kinetic_density(field: PlanarField, nu: float, form: str = "squares") -> np.ndarray:
    """Kinetic density at the midpoint cells, shape ``(N_r, N_theta)``."""
    g = field.grid
    xp, yp = cartesian_derivatives(g, field.eta_plus)
    xm, ym = cartesian_derivatives(g, field.eta_minus)
    return kinetic_from_derivatives(xp, yp, xm, ym, nu, form)


def potential_from_values(em, ep, nu: float, kappa: float = 1.0):
    _check_nu(nu)
    a, b = abs(em) ** 2, abs(ep) ** 2
    e = 0.5 * (b - 1.0) ** 2 + 0.5 * (a - 1.0) ** 2 + 2.0 * a * b + nu * _dot(ep**2, em**2)
    return kappa**2 * (e - 0.5)


def potential_density(field: PlanarField, nu: float, kappa: float = 1.0) -> np.ndarray:
    """Renormalized ``kappa^2 (e_pot - 1/2)`` at every node."""
    return potential_from_values(field.eta_minus, field.eta_plus, nu, kappa)


@dataclass(frozen=True)
class PlanarEnergy:
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


def planar_energy(field: PlanarField, nu: float = 0.0, kappa: float = 1.0) -> PlanarEnergy:
    g = field.grid
    kin = float(np.sum(g.cell_weights() * kinetic_density(field, nu, "squares")))
    pot = float(np.sum(g.node_weights() * potential_density(field, nu, kappa)))
    return PlanarEnergy(kin, pot)


def _kinetic_gradient(grid: DiskGrid, em, ep, nu: float):
    """Packaged gradient ``dE/dRe + i dE/dIm`` of the kinetic energy."""
    xp, yp = cartesian_derivatives(grid, ep)
    xm, ym = cartesian_derivatives(grid, em)
    w = grid.cell_weights()
    a, b = 0.5 * (1.0 + nu), 0.5 * (1.0 - nu)
    l1, l2 = xp + xm, yp - ym
    l3, l4 = yp + 1j * xm, xp + 1j * ym
    # d|alpha p + ...|^2 / d conj(p) packaged: 2 conj(alpha) l
    g_xp = 2 * w * (a * l1 + b * l4)
    g_yp = 2 * w * (a * l2 + b * l3)
    g_xm = 2 * w * (a * l1 - 1j * b * l3)
    g_ym = 2 * w * (-a * l2 - 1j * b * l4)
    return _cartesian_adjoint(grid, g_xm, g_ym), _cartesian_adjoint(grid, g_xp, g_yp)


def _potential_gradient(grid: DiskGrid, em, ep, nu: float, kappa: float):
    w = grid.node_weights() * kappa**2
    a, b = abs(em) ** 2, abs(ep) ** 2
    gm = w * (2.0 * (a - 1.0) * em + 4.0 * b * em + 2.0 * nu * np.conj(em) * ep**2)
    gp = w * (2.0 * (b - 1.0) * ep + 4.0 * a * ep + 2.0 * nu * np.conj(ep) * em**2)
    return gm, gp


def energy_gradient(field: PlanarField, nu: float = 0.0, kappa: float = 1.0):
    """Packaged gradient w.r.t. every nodal value (centre copies not yet summed)."""
    g = field.grid
    km, kp = _kinetic_gradient(g, field.eta_minus, field.eta_plus, nu)
    pm, pp = _potential_gradient(g, field.eta_minus, field.eta_plus, nu, kappa)
    return km + pm, kp + pp


def _free_gradient(grid, gm, gp):
    """Restrict a nodal gradient to free dofs: sum centre copies, zero the rim."""
    out = []
    for gx in (gm, gp):
        gx = gx.copy()
        gx[0, :] = gx[0].sum()
        gx[-1, :] = 0.0
        out.append(gx)
    return out


# -- boundary admissibility ---------------------------------------------------


def fourier_modes(g: np.ndarray) -> np.ndarray:
    return np.fft.fft(g) / g.size


def is_kernel_trace(g_minus: np.ndarray, g_plus: np.ndarray, rtol: float = 1e-10) -> bool:
    """True iff the rim data is the trace of ``(c- - alpha conj(z), c+ + alpha z)``."""
    cm, cp = fourier_modes(g_minus), fourier_modes(g_plus)
    scale = max(np.abs(cm).max(), np.abs(cp).max(), 1.0)
    other_p = np.delete(cp, [0, 1])
    other_m = np.delete(cm, [0, cm.size - 1])
    if max(np.abs(other_p).max(), np.abs(other_m).max()) > rtol * scale:
        return False
    return abs(cp[1] + cm[-1]) <= rtol * scale


def kernel_slope(g_minus: np.ndarray, g_plus: np.ndarray) -> complex:
    """``alpha R`` of a kernel trace, read off the ``e^{i theta}`` mode of ``g+``."""
    return complex(fourier_modes(g_plus)[1])


# -- minimization -------------------------------------------------------------


@dataclass(frozen=True)
class PlanarConfig:
    tol: float = 1e-6
    max_iter: int = 50000
    alpha0: float = 1e-3
    armijo: float = 1e-4
    max_backtracks: int = 40
    record_every: int = 50
    extras: dict = field(default_factory=dict)


def harmonic_extension(grid: DiskGrid, g_minus, g_plus) -> PlanarField:
    """Rim data extended by ``(r/R)^|k|`` per Fourier mode; centre from mode 0."""
    out = []
    for g in (g_minus, g_plus):
        c = fourier_modes(_as_ring(g, grid))
        k = np.fft.fftfreq(grid.N_theta, 1.0 / grid.N_theta)
        rho = (grid.r / grid.R)[:, None]
        vals = np.fft.ifft(c[None, :] * rho ** np.abs(k)[None, :], axis=1) * grid.N_theta
        vals[0, :] = c[0]
        vals[-1, :] = _as_ring(g, grid)
        out.append(vals)
    return PlanarField(grid, out[0], out[1], g_minus=_as_ring(g_minus, grid), g_plus=_as_ring(g_plus, grid))


def minimize_planar(
    grid: DiskGrid,
    g_minus,
    g_plus,
    nu: float = 0.0,
    kappa: float = 1.0,
    cfg: PlanarConfig | None = None,
    init: PlanarField | None = None,
):
    """Gradient descent on the discrete energy with the rim held fixed.

    Search directions are the lumped-mass-scaled gradient; the step length
    follows Barzilai-Borwein with Armijo backtracking so the energy never
    increases.  Stops when the sup-norm of the scaled gradient is ``<= tol``.
    Returns ``(PlanarField, SolveReport)``.
    """
    cfg = cfg or PlanarConfig()
    _check_nu(nu)
    gm_rim, gp_rim = _as_ring(g_minus, grid), _as_ring(g_plus, grid)
    # constant data (alpha = 0) leaves the energy coercive on W, so only a
    # genuinely affine kernel trace is refused
    scale = max(np.abs(gm_rim).max(), np.abs(gp_rim).max(), 1.0)
    if is_kernel_trace(gm_rim, gp_rim) and abs(kernel_slope(gm_rim, gp_rim)) > 1e-10 * scale:
        raise IllPosedBoundaryData("boundary data is the trace of an affine kinetic-kernel field")
    field_ = init if init is not None else harmonic_extension(grid, gm_rim, gp_rim)
    if not (np.array_equal(field_.eta_minus[-1], gm_rim) and np.array_equal(field_.eta_plus[-1], gp_rim)):
        raise InvalidArgument("initial field does not match the boundary data")
    mass = grid.lumped_mass()
    mass_c = mass.copy()
    mass_c[0, :] = mass[0, 0]

    em, ep = field_.eta_minus.copy(), field_.eta_plus.copy()

    def energy(em, ep):
        f = PlanarField(grid, em, ep)
        return planar_energy(f, nu, kappa).total

    def grad(em, ep):
        gm, gp = _free_gradient(grid, *energy_gradient(PlanarField(grid, em, ep), nu, kappa))
        return gm / mass_c, gp / mass_c, gm, gp

    E = energy(em, ep)
    dm, dp, Gm, Gp = grad(em, ep)
    trace = [E]
    alpha = cfg.alpha0
    damping = 0
    res = float(max(np.abs(dm).max(), np.abs(dp).max()))
    history = [res]
    it = 0
    while res > cfg.tol:
        if it >= cfg.max_iter:
            rep = SolveReport(False, it, res, tuple(history), damping, cfg.tol, {"energy_trace": trace})
            raise SolverFailure(f"planar descent did not converge in {cfg.max_iter} iterations", rep)
        slope = float(np.sum((np.conj(Gm) * dm).real + (np.conj(Gp) * dp).real))
        for k in range(cfg.max_backtracks + 1):
            em_new, ep_new = em - alpha * dm, ep - alpha * dp
            E_new = energy(em_new, ep_new)
            if np.isfinite(E_new) and E_new <= E - cfg.armijo * alpha * slope:
                break
            if k == cfg.max_backtracks:
                rep = SolveReport(False, it, res, tuple(history), damping, cfg.tol, {"energy_trace": trace})
                raise NumericalBreakdown("planar line search failed", rep)
            alpha *= 0.5
            damping += 1
        dm_new, dp_new, Gm_new, Gp_new = grad(em_new, ep_new)
        # Barzilai-Borwein in the mass inner product
        s_m, s_p = em_new - em, ep_new - ep
        sMs = float(np.sum(mass_c * (abs(s_m) ** 2 + abs(s_p) ** 2)))
        sy = float(np.sum((np.conj(s_m) * (Gm_new - Gm)).real + (np.conj(s_p) * (Gp_new - Gp)).real))
        alpha = sMs / sy if sy > 0 else 2.0 * alpha
        em, ep, E = em_new, ep_new, E_new
        dm, dp, Gm, Gp = dm_new, dp_new, Gm_new, Gp_new
        res = float(max(np.abs(dm).max(), np.abs(dp).max()))
        it += 1
        if it % cfg.record_every == 0:
            trace.append(E)
            history.append(res)
    trace.append(E)
    history.append(res)
    out = PlanarField(grid, em, ep, gm_rim, gp_rim)
    modes = {
        "eta_minus": _mode_mass(grid, em),
        "eta_plus": _mode_mass(grid, ep),
    }
    rep = SolveReport(True, it, res, tuple(history), damping, cfg.tol, {"energy_trace": trace, "fourier_modes": modes})
    return out, rep


def _mode_mass(grid: DiskGrid, eta: np.ndarray, top: int = 4) -> dict:
    """Share of the r-weighted L^2 mass carried by each angular mode (largest ``top``)."""
    c = np.fft.fft(eta, axis=1) / grid.N_theta
    w = grid.node_weights()[:, :1]
    mass = np.sum(w * abs(c) ** 2, axis=0)
    total = mass.sum()
    if total == 0:
        return {}
    k = np.fft.fftfreq(grid.N_theta, 1.0 / grid.N_theta).astype(int)
    order = np.argsort(mass)[::-1][:top]
    return {int(k[i]): float(mass[i] / total) for i in order}


def relative_l2_error(a: PlanarField, b: PlanarField) -> float:
    w = a.grid.node_weights()
    num = np.sum(w * (abs(a.eta_minus - b.eta_minus) ** 2 + abs(a.eta_plus - b.eta_plus) ** 2))
    den = np.sum(w * (abs(b.eta_minus) ** 2 + abs(b.eta_plus) ** 2))
    return float(np.sqrt(num / den))


# -- coercivity -----------------------------------------------------------------


def _free_index(grid: DiskGrid):
    """Map free complex dofs (centre + rings 1..N_r-1, both components) to arrays."""
    n_ring = (grid.N_r - 1) * grid.N_theta
    return 2 * (1 + n_ring)


def _unpack(grid: DiskGrid, x: np.ndarray):
    half = x.size // 2
    out = []
    for v in (x[:half], x[half:]):
        a = np.zeros((grid.N_r + 1, grid.N_theta), dtype=complex)
        a[0, :] = v[0]
        a[1:-1] = v[1:].reshape(grid.N_r - 1, grid.N_theta)
        out.append(a)
    return out


def _pack(grid: DiskGrid, gm: np.ndarray, gp: np.ndarray) -> np.ndarray:
    return np.concatenate([[gm[0].sum()], gm[1:-1].ravel(), [gp[0].sum()], gp[1:-1].ravel()])


def coercivity_matrices(grid: DiskGrid, nu: float):
    """Hermitian matrices of the kinetic form and the H^1 norm on rim-zero fields."""
    _check_nu(nu)
    n = _free_index(grid)
    K = np.empty((n, n), dtype=complex)
    M = np.empty((n, n), dtype=complex)
    wn = grid.node_weights()
    wc = grid.cell_weights()
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        em, ep = _unpack(grid, e)
        km, kp = _kinetic_gradient(grid, em, ep, nu)
        K[:, k] = 0.5 * _pack(grid, km, kp)
        hm, hp = [], []
        for eta in (em, ep):
            x, y = cartesian_derivatives(grid, eta)
            hm.append(_cartesian_adjoint(grid, 2 * wc * x, 2 * wc * y) + 2 * wn * eta)
        M[:, k] = 0.5 * _pack(grid, hm[0], hm[1])
    return 0.5 * (K + K.conj().T), 0.5 * (M + M.conj().T)


def coercivity_estimate(grid: DiskGrid, nu: float, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Smallest Rayleigh quotient ``int e_kin / ||eta||_{H^1}^2`` over rim-zero fields.

    Inverse iteration on ``K x = c M x`` with a Cholesky factor of ``K``.
    """
    K, M = coercivity_matrices(grid, nu)
    try:
        chol = sla.cho_factor(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("kinetic form is not positive definite on rim-zero fields") from exc
    # a generic start vector: symmetric ones can miss the lowest mode entirely
    rng = np.random.default_rng(0)
    x = rng.standard_normal(K.shape[0]) + 1j * rng.standard_normal(K.shape[0])
    for _ in range(max_iter):
        y = sla.cho_solve(chol, M @ x)
        x = y / np.sqrt((y.conj() @ M @ y).real)
        Kx = K @ x
        c = float((x.conj() @ Kx).real)
        if np.linalg.norm(Kx - c * (M @ x)) <= tol * np.linalg.norm(Kx):
            return c
    raise NumericalBreakdown("coercivity inverse iteration stalled")
