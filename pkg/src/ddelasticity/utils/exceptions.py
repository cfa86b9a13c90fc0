"""
Custom exceptions for ddelasticity.
"""
from typing import Any, Optional


class BaseDDError(Exception):
    """Base exception for all ddelasticity errors."""
    pass


class ConfigError(BaseDDError):
    """Configuration-related errors."""
    pass


class MeshError(BaseDDError):
    """Base exception for mesh construction errors."""
    pass


class PartitionError(MeshError):
    """Subdomain grid does not fit the mesh."""
    pass


class BoundaryConditionError(MeshError):
    """Invalid Dirichlet or traction specification."""
    pass


class DimensionMismatchError(BaseDDError, ValueError):
    """Vector or matrix sizes do not match."""

    def __init__(self, what: str, expected: Any, actual: Any):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {actual}")


class AssemblyError(BaseDDError):
    """Errors while assembling finite element operators."""
    pass


class FactorizationError(BaseDDError):
    """Base exception for factorisation and spectral errors."""
    pass


class IndefiniteMatrixError(FactorizationError):
    """A matrix or operator expected to be SPD is not."""
    pass


class NonPositiveSpectrumError(FactorizationError):
    """A pencil or Ritz eigenvalue is not strictly positive."""

    def __init__(self, value: float, context: str = ""):
        self.value = value
        message = f"Non-positive eigenvalue {value:.3e}"
        if context:
            message += f" ({context})"
        super().__init__(message)


class SolverError(BaseDDError):
    """Base exception for iterative solver errors."""
    pass


class PreconditionerError(SolverError):
    """A preconditioner cannot be built or applied to the given input."""
    pass


class ConvergenceError(SolverError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message: str, stats: Any = None, report: Optional[Any] = None):
        self.stats = stats
        self.report = report
        super().__init__(message)


class OptimizationError(BaseDDError):
    """Errors in the density update."""
    pass


class ReportingError(BaseDDError):
    """Output could not be written or read."""

    def __init__(self, path: Any, reason: str = ""):
        self.path = path
        self.reason = reason
        message = f"Cannot access '{path}'"
        if reason:
            message += f": {reason}"
        super().__init__(message)
