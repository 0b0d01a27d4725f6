"""Exception types shared across the package."""


class OrliczError(Exception):
    """Base class for all package errors."""


class DomainError(OrliczError, ValueError):
    """Argument outside the domain of a function (e.g. negative x)."""


class RangeError(OrliczError, ValueError):
    """Requested value is not attained by the function."""


class PreconditionError(OrliczError, ValueError):
    """An operation's documented precondition does not hold."""


class BuildError(OrliczError, ValueError):
    """A chain specification violates one of its structural properties."""


class UnsupportedError(OrliczError, NotImplementedError):
    """Requested configuration is valid mathematically but not simulated."""


class ConfigError(OrliczError, ValueError):
    """An experiment configuration failed to parse or validate."""
