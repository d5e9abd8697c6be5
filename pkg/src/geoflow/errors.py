"""Exception hierarchy shared across the package."""


class GeoflowError(Exception):
    """Base class for all package errors."""


class DimensionError(GeoflowError, ValueError):
    """Shapes or dimensions do not match."""


class InvariantError(GeoflowError, ValueError):
    """A domain invariant (self-adjointness, unitarity, ...) is violated."""


class NotOnTraceOneError(InvariantError):
    """Input matrix does not have unit trace."""


class AffinityError(GeoflowError):
    """Assembled GKLS field is not affine; signals a convention bug."""


class UnsupportedDegreeError(GeoflowError):
    """A polynomial field operation would exceed degree 3."""


class BlowUpError(GeoflowError):
    """Normalizing trace of the nonlinear SL(n, C) action vanished."""


class IntegrationError(GeoflowError):
    """Integrator exceeded its step budget or produced a non-finite state."""


class AmbiguousSpectrumError(GeoflowError):
    """Eigenvalue clustering is ambiguous at the requested tolerance."""


class CertificationError(GeoflowError):
    """Purity Lie derivative was positive on a sampled state."""

    def __init__(self, message, sample=None, value=None):
        super().__init__(message)
        self.sample = sample
        self.value = value
