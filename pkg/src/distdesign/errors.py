"""Exception hierarchy shared by all modules."""


class DistDesignError(Exception):
    """Base class for package errors."""


class InvalidInputError(DistDesignError, ValueError):
    """Raised for malformed arguments (bad shapes, nonfinite values, ...)."""


class DegenerateDataError(InvalidInputError):
    """Raised when the data carry no information (e.g. constant responses)."""


class DesignParseError(InvalidInputError):
    """Raised when a design file cannot be parsed.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(DistDesignError, ArithmeticError):
    """Raised when a factorization fails even after jitter escalation."""
