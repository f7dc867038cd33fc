"""Exception types raised across the package."""


class PreconditionError(ValueError):
    """An argument lies outside the documented domain of an operation."""


class DegeneratePairError(PreconditionError):
    """The pair split law was requested for m = 2, where V2 = n - 1 - V1."""


class DomainError(PreconditionError):
    """A spectral quantity was evaluated outside its region of definition."""


class RegimeError(PreconditionError):
    """An asymptotic formula was used outside the range where it holds."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals
