"""
Custom exceptions for the cross-diffusion solver.

Provides specific exception types for better error handling and debugging.
"""

from typing import Optional


class MSFSolverError(Exception):
    """Base exception for solver errors."""
    pass


class DomainError(MSFSolverError):
    """Exception for thermodynamic inputs outside the admissible set.

    Raised when a density or temperature is nonpositive or non-finite.
    ``component`` is the offending species index (0-based) or ``"theta"``.
    """
    def __init__(self, message: str, component: Optional[object] = None):
        self.component = component
        super().__init__(message)


class ConfigurationError(MSFSolverError):
    """Exception for configuration errors.

    ``key_path`` names the dotted configuration key that failed, e.g. ``kappa``
    or ``matrix.params.b``.
    """
    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        super().__init__(message)


class ValidationError(MSFSolverError):
    """Exception for violated structural invariants of a computed object."""
    pass


class SingularityError(MSFSolverError):
    """Exception for matrices that are singular beyond their known kernel."""
    def __init__(self, message: str, condition: Optional[float] = None):
        self.condition = condition
        super().__init__(message)


class SolverError(MSFSolverError):
    """Exception for non-finite intermediates during residual assembly."""
    def __init__(self, message: str, node: Optional[int] = None):
        self.node = node
        super().__init__(message)


class NonConvergenceError(MSFSolverError):
    """Exception for a nonlinear solve that did not reach its tolerance."""
    def __init__(self, message: str, iterations: int = 0, last_residual: float = float("nan")):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(message)


class AbortError(MSFSolverError):
    """Exception for a run that cannot continue.

    Raised after the time-step halving budget is exhausted.
    """
    def __init__(self, message: str, t: float = float("nan"), reason: str = ""):
        self.t = t
        self.reason = reason
        super().__init__(message)


class StructuralViolationError(MSFSolverError):
    """Exception for an accepted step that fails a diagnostics gate."""
    def __init__(self, message: str, gate: str = "", step: Optional[int] = None):
        self.gate = gate
        self.step = step
        super().__init__(message)
