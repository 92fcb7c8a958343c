"""
Exception hierarchy for replicability analysis.

Command handlers map these onto exit statuses: input problems exit with 2,
numeric failures with 3.
"""

from typing import Optional


class ReplicabilityError(Exception):
    """Base class for every error raised by this package."""


class InputDataError(ReplicabilityError, ValueError):
    """Malformed or out-of-range input data."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        self.line = line
        self.column = column
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class ParamsValidationError(ReplicabilityError, ValueError):
    """Model parameters that violate one or more invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid model parameters: " + "; ".join(self.violations))


class DomainError(ReplicabilityError, ValueError):
    """Argument outside the domain of a density or probability."""


class NumericalFailure(ReplicabilityError, ArithmeticError):
    """Computation produced zero total probability, non-finite values or a non-unique solution."""
