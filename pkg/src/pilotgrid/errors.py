"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a combination of parameters cannot produce a usable setup."""
