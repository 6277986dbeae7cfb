"""Exception types shared across the package."""


class ModHelmError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ModHelmError, ValueError):
    """Invalid parameters, unsupported orders, malformed configs."""


class DomainError(ModHelmError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class BesselOverflowError(ModHelmError, OverflowError):
    """Unscaled Bessel value not representable in double precision."""


class GeometryError(ModHelmError, ValueError):
    """Invalid curve or domain (self-intersection, bad orientation, ...)."""


class ConvergenceError(ModHelmError, RuntimeError):
    """Iterative solver failed to reach the requested tolerance."""

    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
        self.iterations = iterations
