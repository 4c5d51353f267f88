"""Exception hierarchy."""


class OrliczError(Exception):
    """Base class for every error raised by orliczkit."""


class ConfigError(OrliczError):
    """Invalid scenario or component specification.

    ``context`` names the offending field (``"space.atoms[2].w"``) or a
    ``line N`` location when the error comes from the config parser.
    """

    def __init__(self, message, context=None):
        self.context = context
        if context:
            message = f"{context}: {message}"
        super().__init__(message)


class DomainError(OrliczError, ValueError):
    """An argument lies outside the domain of an operation (NaN, negative weight, ...)."""


class ConvergenceError(OrliczError, ArithmeticError):
    """A numerical routine failed to converge or met inconsistent samples."""
