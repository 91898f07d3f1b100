"""
core/exceptions.py
──────────────────
Every failure the lab can raise. Callers catch LabError to tell a compute
failure (exit code 3) apart from a bad configuration (ConfigError, exit 2).
"""

from typing import Any, Optional


class LabError(Exception):
    """Root of all lab failures."""


class DomainError(LabError, ValueError):
    """Argument outside the domain of a nonlinearity or a model (w <= -1, λ <= 1, ...)."""


class NoRootError(LabError):
    """A scalar equation has no admissible root in the searched bracket."""


class BlowUpError(LabError):
    """An integrated orbit left the region where it is known to live."""


class NonConvergenceError(LabError):
    """An iteration exhausted its budget or its final residual is too large."""

    def __init__(self, message: str, residual: Optional[float] = None, iterations: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NonContractionError(NonConvergenceError):
    """The observed Lipschitz ratio stayed at or above one."""


class BallViolationError(LabError):
    """An iterate left the a-priori ball (ball_r, ball_R)."""


class SingularJacobianError(LabError):
    """A dense Newton block could not be factorized."""


class GuardViolationError(LabError):
    """A time integration crossed its guard; `snapshot` holds the last valid state."""

    def __init__(self, message: str, snapshot: Any = None):
        super().__init__(message)
        self.snapshot = snapshot


class ResolutionError(LabError):
    """A profile is not resolved well enough on its grid for the requested operation."""


class ConfigError(LabError, ValueError):
    """Invalid run configuration; the message names the offending key."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class ExperimentAborted(LabError):
    """An experiment stopped early; `report` holds what was measured before the failure."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report
