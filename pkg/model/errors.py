"""Exceptions raised by model components."""


class ModelConfigError(ValueError):
    """Component configuration is inconsistent with its inputs."""


class SequenceLengthError(ValueError):
    """An assembled or instruction sequence exceeds the configured maximum."""


class ModeError(ValueError):
    """A visual mode needs a branch the model was built without."""
