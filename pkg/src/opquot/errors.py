"""Exception types raised across the package."""

from typing import Optional


class OpQuotError(Exception):
    """Root of every error raised on purpose by opquot."""


class ContractViolation(OpQuotError, ValueError):
    """A precondition of an operation does not hold."""


class ShapeMismatchError(ContractViolation):
    """Operands live in different algebras or at different matrix levels."""


class CertificateError(OpQuotError, RuntimeError):
    """A functional fails its annihilation or normalisation checks."""


class SpecError(OpQuotError, ValueError):
    """
    A problem document cannot be parsed or is inconsistent.

    Args:
        message (str): What went wrong.
        location (str): Dotted key path inside the document, if known.
    """

    def __init__(self, message: str, location: str = "") -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class SolverConvergenceError(OpQuotError, RuntimeError):
    """
    An iterative or conic solver did not reach the requested accuracy.

    Args:
        message (str): Human readable description.
        best_primal (Optional[float]): Best upper bound found.
        best_dual (Optional[float]): Best lower bound found.
        gap (Optional[float]): best_primal - best_dual when both are known.
        residual (Optional[float]): Residual that triggered the failure.
    """

    def __init__(self, message: str, best_primal: Optional[float] = None,
                 best_dual: Optional[float] = None, gap: Optional[float] = None,
                 residual: Optional[float] = None) -> None:
        self.best_primal = best_primal
        self.best_dual = best_dual
        self.gap = gap
        self.residual = residual
        super().__init__(message)
