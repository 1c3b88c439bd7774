"""Exception types shared across the package.

Every exception carries a stable ``code`` string used by the CLI when it
serializes errors to machine-readable JSON, so library callers and scripts
can dispatch on the code without parsing messages.
"""

from __future__ import annotations


class HeatLatticeError(Exception):
    """Base class for all package errors."""

    code = "Internal"


class EmptyDomainError(HeatLatticeError):
    """The discretized domain contains no lattice points."""

    code = "EmptyDomain"


class DisconnectedDomainError(HeatLatticeError):
    """The nearest-neighbor graph on the interior sites is not connected."""

    code = "DisconnectedDomain"


class ProjectionAmbiguousError(HeatLatticeError):
    """Boundary projection is not unique (ball center)."""

    code = "ProjectionAmbiguous"


class NoConvergenceError(HeatLatticeError):
    """Iterative solver hit its iteration cap before reaching tolerance."""

    code = "NoConvergence"


class StepLimitExceededError(HeatLatticeError):
    """A chain ran past its hard step cap; likely a bug or a pathological setup."""

    code = "StepLimitExceeded"


class InsufficientSamplesError(HeatLatticeError):
    """Too few samples to compute the requested statistic."""

    code = "InsufficientSamples"


class RareEventError(HeatLatticeError):
    """A conditioning event occurred too rarely in the sample."""

    code = "RareEvent"


class ConfigInvalidError(HeatLatticeError):
    """A run configuration failed schema or cross-field validation."""

    code = "ConfigInvalid"

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message)
        self.field = field


class IoFailureError(HeatLatticeError):
    """Reading input or writing output failed."""

    code = "IoFailure"
