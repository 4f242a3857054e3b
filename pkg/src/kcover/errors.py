"""Exception types shared across the package."""


class KcoverError(Exception):
    """Base class for package errors."""


class DomainError(KcoverError, ValueError):
    """A point, cell or slice lies outside the domain the operation covers."""


class ConfigError(KcoverError, ValueError):
    """An environment or planner configuration is unusable as given."""


class ProviderError(KcoverError, RuntimeError):
    """The external gain provider failed or violated the wire protocol."""
