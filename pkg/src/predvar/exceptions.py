"""Exception types raised across the package."""


class PredvarError(Exception):
    """Base class for all package-specific errors."""


class InvalidInput(PredvarError, ValueError):
    """Input array contains NaN/Inf or has an unusable dtype/shape."""


class DimensionError(PredvarError, ValueError):
    """Array dimensions are inconsistent with the requested operation."""


class InsufficientData(PredvarError):
    """Too few samples for the requested computation."""


class RankError(PredvarError):
    """A matrix does not have the rank the operation requires."""


class SingularLoadings(PredvarError):
    """The stacked loadings matrix is singular or near-singular."""


class NotDualPair(PredvarError):
    """Loadings and weights do not satisfy the duality relation."""


class UnstableDynamics(PredvarError):
    """Latent VAR dynamics are not stable (companion spectral radius >= 1)."""


class InvalidCovariance(PredvarError):
    """A covariance matrix is not symmetric positive semidefinite."""


class SingularGram(PredvarError):
    """A least-squares Gram matrix is singular; regression is underdetermined."""


class SingularCovariance(PredvarError):
    """A covariance matrix that must be invertible is singular."""


class SingularTransform(PredvarError):
    """A basis-change matrix is singular or near-singular."""


class OrderError(PredvarError, ValueError):
    """The autoregressive order is out of range."""


class ConfigError(PredvarError, ValueError):
    """Invalid configuration value or combination."""


class IntegrationError(PredvarError):
    """Numerical integration diverged or produced non-finite state."""


class IoError(PredvarError, OSError):
    """A file could not be read or written."""


class FormatError(PredvarError, ValueError):
    """A data file does not conform to the expected format."""
