"""Exception hierarchy."""


class DomainError(ValueError):
    """Input outside the domain of a matrix function."""


class GeometryError(ValueError):
    """A point or tangent vector does not belong where it is used."""


class InjectivityRadiusError(GeometryError):
    """Step or target lies outside the region where exp/log are diffeomorphic."""


class LogUnavailableError(GeometryError, NotImplementedError):
    """The geometry has no closed-form logarithm."""


class ConfigError(ValueError):
    """Invalid solver, generator or factorization configuration."""
