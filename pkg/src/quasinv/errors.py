"""Exception types shared across the package."""


class DomainError(ValueError):
    """A map or estimator was evaluated outside its domain of definition."""


class InvalidGeometryError(ValueError):
    """A boundary description does not define a strictly starlike domain."""


class ResolutionError(RuntimeError):
    """A sampled estimate cannot be formed at the requested resolution."""
