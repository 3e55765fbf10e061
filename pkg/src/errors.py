"""
Exception hierarchy for the entanglement mirror toolkit.

Config problems map to CLI exit code 2, physics violations to exit code 3.
"""

from typing import Any, Dict, Optional


class MirrorError(Exception):
    """Base class for every error raised by the toolkit"""


class ConfigError(MirrorError):
    """Scenario configuration could not be parsed or validated"""

    exit_code = 2


class UnknownPresetError(ConfigError):
    """Requested preset name is not registered"""


class DimensionError(MirrorError, ValueError):
    """Array shapes, mode labels or tensor dimensions do not agree"""


class PhysicsViolation(MirrorError):
    """
    A state or generator left the physical domain during a run.

    Args:
        message: Human readable description
        params: Offending parameter set, reported by the CLI
    """

    exit_code = 3

    def __init__(self, message: str, params: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.params = dict(params or {})

    def __reduce__(self):
        return (type(self), (super().__str__(), self.params))

    def __str__(self) -> str:
        base = super().__str__()
        if self.params:
            details = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
            return f"{base} [{details}]"
        return base


class UnphysicalStateError(PhysicsViolation):
    """Covariance violates Σ + iΩ ⪰ 0 or has a non-positive determinant"""


class UnsupportedStateError(PhysicsViolation):
    """State lies outside the family a closed-form measure supports"""


class NonCommutingMonitorsError(PhysicsViolation):
    """Simultaneously monitored quadratures do not commute"""


class TraceDriftError(PhysicsViolation):
    """Density matrix trace drifted beyond tolerance"""


class NormCollapseError(PhysicsViolation):
    """Stochastic pure-state trajectory lost its norm"""
