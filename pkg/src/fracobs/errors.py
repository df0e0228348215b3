"""Exception hierarchy shared by every fracobs module."""

from __future__ import annotations


class FracObsError(Exception):
    """Base class for all library errors."""


class PoleError(FracObsError, ValueError):
    """Gamma evaluated at a non-positive integer."""


class AccuracyError(FracObsError, ArithmeticError):
    """No evaluation method reached the requested tolerance."""


class ConvergenceError(FracObsError, ArithmeticError):
    """A series or quadrature failed to stabilise."""


class DomainError(FracObsError, ValueError):
    """Argument outside the domain of the operation."""


class GridMismatchError(FracObsError, ValueError):
    """Two grid functions live on different nodes."""


class EigenFailure(FracObsError, ArithmeticError):
    """Symmetric eigendecomposition failed or produced non-finite output."""


class ConventionError(FracObsError, ValueError):
    """A measurement trace has the wrong time convention for the operation."""


class NotObservableError(FracObsError):
    """The constrained observability test fails and no regularisation was requested."""


class MaxIterError(FracObsError):
    """The Krylov solver stopped at the iteration cap before reaching the tolerance.

    The partial report is attached as ``report``.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
