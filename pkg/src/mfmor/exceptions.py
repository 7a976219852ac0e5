"""Exception hierarchy shared across the package."""


class MfmorError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MfmorError):
    """A configuration value or precondition is invalid."""


class DomainError(MfmorError, ValueError):
    """A runtime value lies outside its admissible domain (e.g. K <= 0)."""


class AssemblyError(MfmorError):
    """A discrete operator could not be assembled."""


class SolverError(MfmorError):
    """A linear solve failed or produced a non-converged result."""


class NumericalError(MfmorError):
    """A dense kernel (SVD, interpolation solve) failed numerically."""
