"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a model is defined."""


class SolverError(RuntimeError):
    """A root search or fit could not produce a result."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ConvergenceError(RuntimeError):
    """An iterative optimizer stopped before meeting its tolerance."""

    def __init__(self, message, best=None, grad_norm=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.grad_norm = grad_norm
        self.iterations = iterations


class InconsistencyError(ValueError):
    """Measured quantities contradict each other (e.g. efficiency above its bound)."""


class InsufficientDataError(ValueError):
    """Not enough data points along some dimension for the requested fit."""
