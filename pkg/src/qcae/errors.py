"""Exception hierarchy shared by all qcae modules."""


class QCAEError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(QCAEError, ValueError):
    """Tensor, kernel or image dimensions are incompatible."""


class BoundsError(QCAEError, IndexError):
    """An index falls outside a tensor."""


class ConfigError(QCAEError, ValueError):
    """A model or training configuration is invalid."""


class ValidationError(QCAEError, ValueError):
    """Input data violates an encoder precondition."""


class DivergenceError(QCAEError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"loss became non-finite ({loss!r}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class ImageError(QCAEError):
    """Base class for image I/O failures."""


class ImageNotFoundError(ImageError, FileNotFoundError):
    pass


class UnsupportedFormatError(ImageError):
    pass


class CorruptImageError(ImageError):
    pass
