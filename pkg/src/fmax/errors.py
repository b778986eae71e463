"""Exception types shared across the package."""


class FmaxError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(FmaxError, ValueError):
    """Inputs have incompatible shapes or lengths."""


class DomainError(FmaxError, ValueError):
    """A numeric input lies outside its valid domain."""


class InconsistencyError(FmaxError, ValueError):
    """A probability table implies an invalid distribution."""


class CapacityError(FmaxError, ValueError):
    """A request exceeds the supported problem size."""


class DataFormatError(FmaxError, ValueError):
    """A file could not be parsed as the expected format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(FmaxError, RuntimeError):
    """A numeric routine produced a non-finite value."""
