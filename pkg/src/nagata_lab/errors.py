"""Exception hierarchy shared by every module."""


class NagataLabError(Exception):
    """Base class for all library errors."""


class DomainError(NagataLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapabilityError(NagataLabError):
    """The request is well-posed but cannot be met with the available data."""


class ConstructionError(NagataLabError):
    """A construction step produced a state the construction rules out."""


class PoleError(DomainError):
    """The logarithm of a modulus was requested at a zero of the function."""
