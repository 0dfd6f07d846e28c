"""Quaternion and real convolutional encoder-decoders with hand-written gradients."""
from .errors import (BoundsError, ConfigError, CorruptImageError, DivergenceError,
                     ImageError, ImageNotFoundError, QCAEError, ShapeError,
                     UnsupportedFormatError, ValidationError)
from .quat import Quaternion, hamilton, split_apply, to_real_matrix
from .qtensor import QTensor

__version__ = "0.1.0"

__all__ = [
    "Quaternion", "QTensor", "hamilton", "split_apply", "to_real_matrix",
    "QCAEError", "ShapeError", "BoundsError", "ConfigError", "ValidationError",
    "DivergenceError", "ImageError", "ImageNotFoundError", "UnsupportedFormatError",
    "CorruptImageError",
]
