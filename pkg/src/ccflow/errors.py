"""Exception hierarchy.

Every error carries a short ``code`` so the command line front end can emit a
greppable one-line diagnostic and a distinct exit status.
"""

from __future__ import annotations


class CCFlowError(Exception):
    code = "E_CCFLOW"
    exit_status = 1


class DimensionError(CCFlowError, ValueError):
    code = "E_DIMENSION"
    exit_status = 3


class InvalidAlgebraError(CCFlowError, ValueError):
    code = "E_ALGEBRA"
    exit_status = 4


class SingularFrameError(CCFlowError, ValueError):
    code = "E_SINGULAR_FRAME"
    exit_status = 5


class InvalidMetricError(CCFlowError, ValueError):
    code = "E_INVALID_METRIC"
    exit_status = 5


class UnsupportedOperationError(CCFlowError):
    code = "E_UNSUPPORTED"
    exit_status = 6


class IntegrationError(CCFlowError, RuntimeError):
    """Implicit solve did not converge."""

    code = "E_INTEGRATION"
    exit_status = 7

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DivergenceError(IntegrationError):
    code = "E_DIVERGENCE"
    exit_status = 8


class CoordinateSingularityError(CCFlowError, ValueError):
    code = "E_COORD_SINGULARITY"
    exit_status = 9


class ConstraintError(CCFlowError, ValueError):
    """Initial velocity violates the velocity constraints."""

    code = "E_CONSTRAINT"
    exit_status = 10

    def __init__(self, message: str, violation: float | None = None):
        super().__init__(message)
        self.violation = violation


class ConstraintDegeneracyError(CCFlowError, ValueError):
    code = "E_CONSTRAINT_DEGENERATE"
    exit_status = 10


class UnknownModelError(CCFlowError, KeyError):
    code = "E_UNKNOWN_MODEL"
    exit_status = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ConfigError(CCFlowError, ValueError):
    code = "E_CONFIG"
    exit_status = 2
