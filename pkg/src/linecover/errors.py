"""Exception types shared across the toolkit."""


class LinecoverError(Exception):
    """Base class for all toolkit errors."""


class DomainError(LinecoverError, ValueError):
    """An argument violates an operation's precondition."""


class ParseError(LinecoverError, ValueError):
    """A density or scenario file could not be parsed."""


class NumericError(LinecoverError, RuntimeError):
    """An internal numerical consistency check failed."""
