"""Exception hierarchy shared by the estimators and the experiment runners."""
from typing import Any, Optional


class EstimationError(Exception):
    """Base class for every failure raised by an estimator."""


class ValidationError(EstimationError, ValueError):
    """Invalid argument, shape or configuration."""


class NumericError(EstimationError, ArithmeticError):
    """Singular, indefinite or otherwise numerically unusable input."""


class ConvergenceError(EstimationError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``best`` holds the best iterate found and ``residual`` the last
    convergence measure, so callers can decide whether to use it anyway.
    """

    def __init__(self, message: str, best: Any = None, residual: Optional[float] = None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class InfeasibleError(EstimationError):
    """A constrained program has no feasible point."""

    def __init__(self, message: str, column: Optional[int] = None):
        super().__init__(message)
        self.column = column
