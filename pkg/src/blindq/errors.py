"""Exception types shared across the package."""


class BlindqError(Exception):
    """Base class for all blindq errors."""


class ParameterError(BlindqError, ValueError):
    """Invalid distribution, policy or analysis parameters."""


class UnstableSystemError(BlindqError, ValueError):
    """Offered load is >= 1, so no stationary regime exists."""


class EmptyInstanceError(BlindqError, ValueError):
    """Operation requires at least one job."""


class ParseError(BlindqError, ValueError):
    """Malformed instance or config file; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(BlindqError, ValueError):
    """Not enough cycles/samples to form an estimate."""


class InternalConsistencyError(BlindqError, RuntimeError):
    """A simulation state that should be impossible; indicates a bug."""
