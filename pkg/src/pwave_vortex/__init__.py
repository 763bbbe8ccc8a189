"""Equivariant vortex profiles of a two-component p-wave Ginzburg-Landau model."""

from .errors import (
    ContinuationStalled,
    IllPosedBoundaryData,
    InvalidArgument,
    NumericalBreakdown,
    PWaveError,
    SolverFailure,
    StepSizeFailure,
    Unsupported,
    UnsupportedDegree,
)
from .radial import EnergyBreakdown, ProfilePair, RadialGrid, SolveReport, build_grid, energy_radial, residual

__version__ = "0.1.0"
