class NumericalError(RuntimeError):
    """A computation failed for numerical rather than input reasons."""


class ConfigError(ValueError):
    """A run configuration did not validate."""
