class VirodiffError(Exception):
    """Base class for solver-side failures (as opposed to bad input)."""


class ConvergenceError(VirodiffError):
    """An iterative method stopped before meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(VirodiffError):
    pass


class StepError(VirodiffError):
    """A time step produced non-finite values or violated a step constraint."""


class RegimeExitError(VirodiffError):
    """A linear-regime experiment left the regime before collecting enough samples."""
