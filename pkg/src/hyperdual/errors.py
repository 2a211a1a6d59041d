"""Exceptions shared across modules."""


class ConfigError(ValueError):
    """Invalid configuration value or experiment setup."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
