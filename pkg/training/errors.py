"""Exceptions raised by optimization, training loops and checkpoint I/O."""

from autograd.errors import GradientError


class EmptyDatasetError(ValueError):
    """A training stage was given no samples."""


class NonFiniteGradientError(GradientError):
    """A parameter gradient contains NaN or infinity."""


class CheckpointError(ValueError):
    """Base class for checkpoint read/validation failures."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the checkpoint magic."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class CheckpointShapeError(CheckpointError):
    """Stored parameter names or shapes do not match the target model."""


class CheckpointFormatError(CheckpointError):
    """Header or payload is malformed or truncated."""
