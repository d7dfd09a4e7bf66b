"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SbmTestError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParameterError(SbmTestError, ValueError):
    """Invalid model parameters, options or call arguments."""

    exit_code = 2


class DivergenceError(ParameterError):
    """A limit-law series does not converge for the requested configuration."""


class DataError(SbmTestError, ValueError):
    """Input data violates a structural requirement (e.g. a self-loop)."""

    exit_code = 2


class ParseError(DataError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DomainError(SbmTestError, ArithmeticError):
    """A logarithm argument left its domain."""

    exit_code = 2


class CapacityError(SbmTestError):
    """The requested computation exceeds a configured size or budget cap."""

    exit_code = 3
