"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class ArmloadError(Exception):
    exit_code = 3


class InvalidInputError(ArmloadError, ValueError):
    """Input violates an operation's precondition."""


class InsufficientDataError(InvalidInputError):
    """Fewer data points than the operation needs (e.g. k-means with n < k)."""


class OutOfDomainError(InvalidInputError):
    """Coordinate outside the region where an operation is defined."""


class NoContourError(InvalidInputError):
    pass


class ParseError(InvalidInputError):
    """Malformed persisted data; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFormatError(ArmloadError):
    exit_code = 2


class NumericError(ArmloadError, ArithmeticError):
    exit_code = 4


class DegenerateContourError(NumericError):
    """Moment normalization impossible because m00 is zero or negative."""
