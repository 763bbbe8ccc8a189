"""Exception hierarchy shared by all solver modules."""


class PWaveError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(PWaveError, ValueError):
    pass


class UnsupportedDegree(PWaveError, ValueError):
    pass


class Unsupported(PWaveError, ValueError):
    pass


class SolverFailure(PWaveError, RuntimeError):
    """Iteration did not converge; ``report`` holds the iteration record."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericalBreakdown(SolverFailure):
    pass


class ContinuationStalled(SolverFailure):
    """Step size fell below the floor; ``family`` holds the members reached."""

    def __init__(self, message, family=None, report=None):
        super().__init__(message, report)
        self.family = family


class StepSizeFailure(SolverFailure):
    pass


class IllPosedBoundaryData(PWaveError, ValueError):
    pass
