"""
Exceptions raised by eqfree.

Every exception carries the process exit code the command line interface
reports when it escapes a task.
"""

from typing import Optional


class EqFreeException(Exception):
    """
    Base class for all eqfree errors.
    """

    exit_code = 1


class ConfigError(EqFreeException, ValueError):
    """
    Malformed or inconsistent configuration.
    """

    exit_code = 2

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SolverError(EqFreeException):
    """
    A numerical solver failed.
    """

    exit_code = 3


class BlowUpError(SolverError):
    """The microscopic state became non-finite during integration."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"non-finite state at t={time:.6g}")


class NewtonDivergence(SolverError):
    """
    Newton iteration did not converge.
    """

    def __init__(self, message: str, residual: float, iterations: int, trajectory=None):
        self.residual = residual
        self.iterations = iterations
        self.trajectory = trajectory
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")


class SingularJacobianError(SolverError):
    """
    A finite-difference Jacobian is numerically singular.
    """

    def __init__(self, message: str, column: Optional[int] = None):
        self.column = column
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message)


class ModelDomainError(EqFreeException):
    """
    A model was asked for a state outside of its domain.
    """

    exit_code = 4


class LiftingDomainError(ModelDomainError):
    """Lifting produced an inadmissible microscopic state."""

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)


class DegenerateConfigurationError(ModelDomainError):
    """Restriction is undefined for this microscopic configuration."""
