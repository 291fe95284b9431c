"""Exception hierarchy shared by all modules."""


class PsrError(Exception):
    """Base class for package errors."""


class InvalidParameterError(PsrError, ValueError):
    """A scalar or array argument is outside its allowed domain."""


class DegenerateStateError(PsrError):
    """Covariance matrix is (numerically) singular."""


class ModelInvalidError(PsrError):
    """Medium model violates its validity constraints, e.g. total absorption >= 1."""


class UnphysicalObservationError(PsrError, ValueError):
    """Observed noise is below what the detection chain can produce."""


class DegenerateFitError(PsrError):
    """Design matrix of a fit is rank deficient."""


class ConfigError(PsrError):
    """Scan configuration could not be parsed or validated."""
