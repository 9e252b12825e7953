"""Exceptions raised while building synthetic data."""


class VocabError(ValueError):
    """Text contains a character outside the vocabulary."""


class PlacementError(ValueError):
    """A word overlaps another word or leaves the grid."""


class SampleKindError(ValueError):
    """The requested question kind does not fit the scene."""


class ImageFormatError(ValueError):
    """A raw image file has a bad header or truncated payload."""
