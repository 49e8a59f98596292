"""
Toolkit Exceptions

Every error raised on purpose by the toolkit derives from WeakTrajError and
carries the CLI exit code for its category:
0 success, 2 validation, 3 data/schema, 4 numerical, 5 I/O.
"""

from typing import Any, Optional


class WeakTrajError(Exception):
    """Base class for toolkit errors"""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        return self.message


class ConfigurationError(WeakTrajError):
    """Physically invalid configuration (grid too narrow, arcsin branch violated)"""

    exit_code = 2


class ValidationFailure(WeakTrajError):
    """Run configuration violates its schema; ``violations`` lists every problem"""

    exit_code = 2

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            "invalid configuration: " + "; ".join(self.violations),
            {"violations": self.violations},
        )


class ArgumentError(WeakTrajError, ValueError):
    """Invalid call arguments"""

    exit_code = 2


class DataError(WeakTrajError):
    """Input data violates an operation's precondition"""

    exit_code = 3


class DegenerateInputError(DataError):
    """All-zero field or image, zero-variance samples"""


class SchemaError(DataError):
    """Artifact does not match its on-disk schema"""


class ArtifactMismatchError(DataError):
    """Artifacts from different configurations were mixed"""


class UndefinedCorrelationError(DataError):
    """Correlation is undefined (constant sequence or too few common planes)"""


class NumericalDomainError(WeakTrajError):
    """Numerical method left its domain of validity"""

    exit_code = 4


class ConvergenceError(NumericalDomainError):
    """Iteration did not converge; ``details`` carries the diagnostics"""


class ArtifactIOError(WeakTrajError):
    """Artifact could not be read or written"""

    exit_code = 5
