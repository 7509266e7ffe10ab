"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An operation received arguments violating its preconditions."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""


class CheckpointError(RuntimeError):
    """A checkpoint file is malformed, truncated, or fails checksum."""


class StyleObjectNotVisibleError(RuntimeError):
    """The style object mask is empty: nothing to transfer from this view."""

    def __init__(self, message: str = "style object not visible"):
        super().__init__(message)
