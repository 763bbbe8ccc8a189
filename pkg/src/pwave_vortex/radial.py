"""Radial meshes, discrete energies, residuals and Jacobians.

Unknowns live on the uniform mesh ``r_i = i*h``, ``i = 0..N``.  Node 0 carries
the Dirichlet value 0 and node N the outer Dirichlet value; residuals and
Jacobians are taken over the interior nodes only, with the two components
interleaved per node (``[f-_1, f+_1, f-_2, f+_2, ...]``) so the Jacobian is
block tridiagonal with 2x2 blocks.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import InvalidArgument, NumericalBreakdown, SolverFailure, UnsupportedDegree

MIN_NODES = 16


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RadialGrid:
    R: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.R) or self.R <= 0:
            raise InvalidArgument(f"R must be positive, got {self.R!r}")
        if int(self.N) != self.N or self.N < MIN_NODES:
            raise InvalidArgument(f"N must be an integer >= {MIN_NODES}, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "R", float(self.R))

    @property
    def h(self) -> float:
        return self.R / self.N

    @property
    def r(self) -> np.ndarray:
        r = np.arange(self.N + 1) * self.h
        r[-1] = self.R
        return r

    @property
    def interior(self) -> np.ndarray:
        return self.r[1:-1]

    def window(self, r_lo: float, r_hi: float) -> np.ndarray:
        """Boolean mask of nodes with ``r_lo <= r <= r_hi``."""
        r = self.r
        return (r >= r_lo - 1e-12 * self.R) & (r <= r_hi + 1e-12 * self.R)


def build_grid(R: float, N: int) -> RadialGrid:
    return RadialGrid(R, N)


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    final_residual: float
    history: tuple = ()
    damping_events: int = 0
    tol: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["history"] = [float(x) for x in self.history]
        return d

    def with_extras(self, **kw) -> "SolveReport":
        return replace(self, extras={**self.extras, **kw})


@dataclass(frozen=True, eq=False)
class ProfilePair:
    """Radial profiles ``(f-, f+)`` of the ansatz ``eta(+/-) = f(+/-)(r) e^{i n(+/-) theta}``.

    ``n`` is the degree of ``eta-``; ``eta+`` has degree ``n + 2``.
    """

    grid: RadialGrid
    fm: np.ndarray
    fp: np.ndarray
    t: float
    n: int = -1

    def __post_init__(self):
        fm, fp = _frozen(self.fm), _frozen(self.fp)
        size = self.grid.N + 1
        if fm.shape != (size,) or fp.shape != (size,):
            raise InvalidArgument(f"profiles must have length N+1={size}")
        if fm[0] != 0.0 or fp[0] != 0.0:
            raise InvalidArgument("profiles must vanish at r=0")
        if not 0.0 <= self.t <= 1.0:
            raise InvalidArgument(f"coupling t must lie in [0, 1], got {self.t!r}")
        if int(self.n) != self.n:
            raise InvalidArgument("degree n must be an integer")
        object.__setattr__(self, "fm", fm)
        object.__setattr__(self, "fp", fp)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "n", int(self.n))

    def with_values(self, fm=None, fp=None, t=None) -> "ProfilePair":
        return ProfilePair(
            self.grid,
            self.fm if fm is None else fm,
            self.fp if fp is None else fp,
            self.t if t is None else t,
            self.n,
        )

    @property
    def interior_vector(self) -> np.ndarray:
        return np.column_stack([self.fm[1:-1], self.fp[1:-1]]).ravel()

    def with_interior(self, x: np.ndarray) -> "ProfilePair":
        x = np.asarray(x).reshape(-1, 2)
        fm = self.fm.copy()
        fp = self.fp.copy()
        fm[1:-1] = x[:, 0]
        fp[1:-1] = x[:, 1]
        return self.with_values(fm, fp)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "f_minus", "f_plus"])
        for row in zip(self.grid.r, self.fm, self.fp):
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, t: float, n: int = -1) -> "ProfilePair":
        return cls.parse_csv(Path(path).read_text(), t, n)

    @classmethod
    def parse_csv(cls, text: str, t: float, n: int = -1) -> "ProfilePair":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["r", "f_minus", "f_plus"]:
            raise InvalidArgument(f"unexpected CSV header {rows[0]}")
        data = np.array(rows[1:], dtype=float)
        grid = build_grid(data[-1, 0], len(data) - 1)
        return cls(grid, data[:, 1], data[:, 2], t, n)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_diag: float
    kinetic_cross: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic_diag + self.kinetic_cross + self.potential

    def to_dict(self) -> dict:
        return {
            "kinetic_diag": self.kinetic_diag,
            "kinetic_cross": self.kinetic_cross,
            "potential": self.potential,
            "total": self.total,
        }


def epot_renorm(fm, fp):
    """Potential density minus its minimum value 1/2 (nu = 0)."""
    fm = np.asarray(fm, dtype=float)
    fp = np.asarray(fp, dtype=float)
    a, b = fm * fm, fp * fp
    return 0.5 * (a + b - 1.0) ** 2 + a * b


def _trapezoid_weights(grid: RadialGrid) -> np.ndarray:
    w = np.full(grid.N + 1, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def _over_r(values, r):
    out = np.zeros_like(values)
    out[1:] = values[1:] / r[1:]
    return out


def energy_radial(p: ProfilePair) -> EnergyBreakdown:
    """Discrete ``I_t`` on the mesh.

    Derivative products are sampled at cell midpoints (weight ``r_{i+1/2} h``)
    and zeroth-order terms by the r-weighted trapezoid rule, so the exact
    gradient of this sum is ``2 r_i h`` times :func:`residual_raw`.
    """
    if p.n != -1:
        raise UnsupportedDegree("energy assembly is implemented for degree n = -1 only")
    g = p.grid
    r, h = g.r, g.h
    w = _trapezoid_weights(g)
    rmid = r[:-1] + 0.5 * h
    dm = np.diff(p.fm) / h
    dp = np.diff(p.fp) / h
    kin_diag = np.sum((dm**2 + dp**2) * rmid) * h + np.sum(w * _over_r(p.fm**2 + p.fp**2, r))
    # (f-' + f-/r)(f+' + f+/r) r = f-'f+' r + f-f+/r + (f- f+)'
    cross = (
        np.sum(dm * dp * rmid) * h
        + np.sum(w * _over_r(p.fm * p.fp, r))
        + p.fm[-1] * p.fp[-1]
        - p.fm[0] * p.fp[0]
    )
    pot = np.sum(w * epot_renorm(p.fm, p.fp) * r)
    return EnergyBreakdown(float(kin_diag), float(p.t * cross), float(pot))


def _laplacian(f, r, h):
    """Centered ``f'' + f'/r`` at interior nodes."""
    return (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2 + (f[2:] - f[:-2]) / (2.0 * r[1:-1] * h)


def _d1(f, h):
    return (f[2:] - f[:-2]) / (2.0 * h)


def _nonlinear(fm, fp):
    nm = fm * (2.0 * fp**2 + fm**2 - 1.0)
    np_ = fp * (2.0 * fm**2 + fp**2 - 1.0)
    return nm, np_


def residual_raw(p: ProfilePair) -> np.ndarray:
    """Euler-Lagrange residual in the coupled (undiagonalized) form.

    Row ``i`` holds ``(-L f- - t/2 C f+ + N-, -L f+ - t/2 C f- + N+)`` at the
    i-th interior node, where ``C`` carries the degree-dependent first-order
    cross terms.  For ``n = -1`` this is ``grad I_t / (2 r h)``.
    """
    g = p.grid
    r, h, n, t = g.r, g.h, p.n, p.t
    ri = r[1:-1]
    fm, fp = p.fm, p.fp
    lap_m, lap_p = _laplacian(fm, r, h), _laplacian(fp, r, h)
    own_m = lap_m - n**2 / ri**2 * fm[1:-1]
    own_p = lap_p - (n + 2) ** 2 / ri**2 * fp[1:-1]
    cross_m = lap_p + 2.0 * (n + 1) / ri * _d1(fp, h) + n * (n + 2) / ri**2 * fp[1:-1]
    cross_p = lap_m - 2.0 * (n + 1) / ri * _d1(fm, h) + n * (n + 2) / ri**2 * fm[1:-1]
    nm, np_ = _nonlinear(fm[1:-1], fp[1:-1])
    return np.column_stack([-own_m - 0.5 * t * cross_m + nm, -own_p - 0.5 * t * cross_p + np_])


def residual(p: ProfilePair) -> np.ndarray:
    """Residual of the diagonalized system, shape ``(N-1, 2)``.

    For ``n = -1``::

        -tau (Lap f- - f-/r^2) + N- - t/2 N+
        -tau (Lap f+ - f+/r^2) + N+ - t/2 N-

    with ``tau = 1 - t^2/4``.  Other degrees use the same row combination
    applied to :func:`residual_raw`.
    """
    if p.n != -1:
        raw = residual_raw(p)
        half = 0.5 * p.t
        return np.column_stack([raw[:, 0] - half * raw[:, 1], raw[:, 1] - half * raw[:, 0]])
    g = p.grid
    r, h, t = g.r, g.h, p.t
    ri2 = r[1:-1] ** 2
    tau = 1.0 - 0.25 * t * t
    nm, np_ = _nonlinear(p.fm[1:-1], p.fp[1:-1])
    lm = _laplacian(p.fm, r, h) - p.fm[1:-1] / ri2
    lp = _laplacian(p.fp, r, h) - p.fp[1:-1] / ri2
    return np.column_stack([-tau * lm + nm - 0.5 * t * np_, -tau * lp + np_ - 0.5 * t * nm])


def _operator_blocks(grid: RadialGrid):
    """Sparse interior matrices for the centered Laplacian and first derivative."""
    m = grid.N - 1
    h = grid.h
    ri = grid.interior
    d1 = sp.diags([-np.ones(m - 1), np.ones(m - 1)], [-1, 1], format="csr") / (2.0 * h)
    d2 = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="csr") / h**2
    lap = d2 + sp.diags(1.0 / ri) @ d1
    return lap, d1


def _interleave(a, b, c, d) -> sp.csr_matrix:
    """Assemble [[a, b], [c, d]] with unknowns interleaved per node."""
    m = a.shape[0]
    block = sp.bmat([[a, b], [c, d]], format="csr")
    perm = np.empty(2 * m, dtype=int)
    perm[0::2] = np.arange(m)
    perm[1::2] = np.arange(m, 2 * m)
    return block[perm][:, perm].tocsr()


def jacobian_raw(p: ProfilePair) -> sp.csr_matrix:
    """Exact derivative of :func:`residual_raw` w.r.t. the interior unknowns."""
    g = p.grid
    n, t = p.n, p.t
    ri = g.interior
    lap, d1 = _operator_blocks(g)
    diag = sp.diags
    fm, fp = p.fm[1:-1], p.fp[1:-1]
    jmm = -(lap - diag(n**2 / ri**2)) + diag(2.0 * fp**2 + 3.0 * fm**2 - 1.0)
    jpp = -(lap - diag((n + 2) ** 2 / ri**2)) + diag(2.0 * fm**2 + 3.0 * fp**2 - 1.0)
    coupling = diag(4.0 * fm * fp)
    jmp = -0.5 * t * (lap + diag(2.0 * (n + 1) / ri) @ d1 + diag(n * (n + 2) / ri**2)) + coupling
    jpm = -0.5 * t * (lap - diag(2.0 * (n + 1) / ri) @ d1 + diag(n * (n + 2) / ri**2)) + coupling
    return _interleave(jmm, jmp, jpm, jpp)


def jacobian(p: ProfilePair) -> sp.csr_matrix:
    """Exact derivative of :func:`residual` (flattened) w.r.t. interior unknowns."""
    m = p.grid.N - 1
    half = 0.5 * p.t
    mix = sp.kron(sp.identity(m), np.array([[1.0, -half], [-half, 1.0]]), format="csr")
    return (mix @ jacobian_raw(p)).tocsr()


def newton(
    fun,
    jac,
    x0: np.ndarray,
    tol: float,
    max_iter: int = 50,
    shrink: float = 0.5,
    max_backtracks: int = 30,
    armijo: float = 1e-4,
):
    """Damped Newton with Armijo backtracking on the residual 2-norm.

    Convergence is declared on the sup-norm of ``fun``.  Returns
    ``(x, SolveReport)``; raises :class:`SolverFailure` when ``max_iter`` is
    exhausted and :class:`NumericalBreakdown` on non-finite iterates.
    """
    x = np.array(x0, dtype=float)
    F = fun(x)
    if not np.all(np.isfinite(F)):
        raise NumericalBreakdown("non-finite residual at initial iterate")
    history = [float(np.max(np.abs(F)))]
    damping = 0
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            rep = SolveReport(False, it, history[-1], tuple(history), damping, tol)
            raise SolverFailure(f"Newton did not converge in {max_iter} iterations", rep)
        dx = spsolve(jac(x).tocsc(), -F, permc_spec="NATURAL")
        if not np.all(np.isfinite(dx)):
            rep = SolveReport(False, it, history[-1], tuple(history), damping, tol)
            raise NumericalBreakdown("non-finite Newton step", rep)
        norm0 = np.linalg.norm(F)
        lam = 1.0
        for k in range(max_backtracks + 1):
            x_new = x + lam * dx
            F_new = fun(x_new)
            ok = np.all(np.isfinite(F_new))
            if ok and np.linalg.norm(F_new) <= (1.0 - armijo * lam) * norm0:
                break
            if k == max_backtracks:
                rep = SolveReport(False, it, history[-1], tuple(history), damping, tol)
                raise SolverFailure("line search failed to reduce the residual", rep)
            lam *= shrink
            damping += 1
        x, F = x_new, F_new
        it += 1
        history.append(float(np.max(np.abs(F))))
    return x, SolveReport(True, it, history[-1], tuple(history), damping, tol)


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
