"""Exception types shared across the package."""


class DeepBassError(Exception):
    """Base class for all package errors."""


class DimensionError(DeepBassError, ValueError):
    """Tensor shapes are incompatible for the requested operation."""


class ParameterError(DeepBassError, ValueError):
    """A numeric argument is outside its valid range."""


class ConfigError(DeepBassError, ValueError):
    """An experiment or model configuration is invalid."""


class FormatError(DeepBassError, ValueError):
    """A data file does not conform to its declared format."""


class OracleError(DeepBassError, RuntimeError):
    """The oracle could not be reached or refused the request."""


class RequestRejected(OracleError):
    """An oracle answer or request was rejected (duplicate, expired, unknown)."""
