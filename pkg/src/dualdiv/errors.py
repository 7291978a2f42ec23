"""Exception types shared across the package."""


class NumericError(RuntimeError):
    """A numerical procedure failed to converge or lost accuracy."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""


class RegimeError(ValueError):
    """An operation was requested outside its parameter regime."""
