"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Unsupported or out-of-range configuration value."""


class PreconditionError(ValueError):
    """An argument violates a structural precondition (shape, PD, unitarity, ...)."""


class SizeError(ConfigError):
    """An enumeration would exceed the configured size cap."""
