"""Degree-one radial Ginzburg-Landau profile ``Lap f - f/r^2 = f(f^2 - 1)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .radial import RadialGrid, SolveReport, _frozen, _laplacian, _operator_blocks, newton


def outer_value(R: float, degree: int = 1) -> float:
    """Truncated tail ``1 - 1/(2R^2) - 9/(8R^4)`` used as the outer Dirichlet value."""
    if degree == 1:
        return 1.0 - 0.5 / R**2 - 9.0 / (8.0 * R**4)
    return 1.0 - 0.5 * degree**2 / R**2


def seed(r: np.ndarray) -> np.ndarray:
    return r / np.sqrt(r * r + 2.0)


@dataclass(frozen=True, eq=False)
class ClassicalProfile:
    grid: RadialGrid
    f: np.ndarray
    report: SolveReport

    def __post_init__(self):
        object.__setattr__(self, "f", _frozen(self.f))


def classical_residual(grid: RadialGrid, f: np.ndarray, degree: int = 1) -> np.ndarray:
    r = grid.r
    fi = f[1:-1]
    return -(_laplacian(f, r, grid.h) - degree**2 * fi / r[1:-1] ** 2) + fi * (fi * fi - 1.0)


def solve_classical(
    grid: RadialGrid, tol: float = 1e-10, max_iter: int = 50, degree: int = 1
) -> ClassicalProfile:
    """Newton solve from the seed ``r / sqrt(r^2 + 2)``.

    Raises :class:`~pwave_vortex.errors.SolverFailure` (carrying the report)
    when the iteration does not converge.
    """
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    lap, _ = _operator_blocks(grid)
    ri2 = grid.interior**2
    f = seed(grid.r) if degree != 0 else np.minimum(1.0, grid.r)
    f[-1] = outer_value(grid.R, degree)

    def fun(x):
        f[1:-1] = x
        return classical_residual(grid, f, degree)

    def jac(x):
        return (-(lap - sp.diags(degree**2 / ri2)) + sp.diags(3.0 * x * x - 1.0)).tocsr()

    x, report = newton(fun, jac, f[1:-1].copy(), tol, max_iter=max_iter)
    f[1:-1] = x
    inc = np.diff(f)
    report = report.with_extras(
        min_increment=float(inc.min()),
        bounded=bool(np.all((f[1:-1] > 0) & (f[1:-1] < 1))),
    )
    return ClassicalProfile(grid, f.copy(), report)
