"""Image files, luma conversion and pixel encodings.

Pixels are normalised to [0, 1]. A pixel enters a quaternion network as
(0, R, G, B) and a real network as three channels; gray images repeat the
luma value in all three slots.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (CorruptImageError, ImageNotFoundError, ShapeError,
                     UnsupportedFormatError, ValidationError)
from .qtensor import QTensor

LUMA = np.array([0.299, 0.587, 0.114])

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_PPM_MAGIC = b"P6"


@dataclass
class ImageBuffer:
    """8-bit RGB image, pixels of shape (H, W, 3)."""
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ShapeError(f"pixels must be (H, W, 3), got {p.shape}")
        if p.dtype != np.uint8:
            if p.min() < 0 or p.max() > 255:
                raise ValidationError("pixel values outside [0, 255]")
            p = p.astype(np.uint8)
        self.pixels = p

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def is_gray(self):
        p = self.pixels
        return bool(np.array_equal(p[..., 0], p[..., 1]) and np.array_equal(p[..., 1], p[..., 2]))

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


def load_image(path) -> ImageBuffer:
    """Read an 8-bit PNG or binary PPM (P6) file."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as f:
            head = f.read(8)
    except FileNotFoundError:
        raise ImageNotFoundError(f"no such image: {path}") from None
    if not (head.startswith(_PNG_MAGIC) or head.startswith(_PPM_MAGIC)):
        raise UnsupportedFormatError(f"{path}: only PNG and binary PPM are supported")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "F"):
                raise UnsupportedFormatError(f"{path}: only 8-bit images are supported")
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except UnsupportedFormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptImageError(f"{path}: {exc}") from None
    return ImageBuffer(rgb.copy())


def save_image(img: ImageBuffer, path):
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    fmt = {".png": "PNG", ".ppm": "PPM"}.get(ext)
    if fmt is None:
        raise UnsupportedFormatError(f"cannot write {ext!r}; use .png or .ppm")
    Image.fromarray(img.pixels, mode="RGB").save(path, format=fmt)


def to_gray_luma(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma, rounded half-up and written to all three channels."""
    g = np.floor(img.pixels.astype(np.float64) @ LUMA + 0.5)
    g = np.clip(g, 0, 255).astype(np.uint8)
    return ImageBuffer(np.repeat(g[..., None], 3, axis=2))


def _check_gray(img):
    if not img.is_gray:
        raise ValidationError("image is not gray-scale (R, G and B differ)")


def encode_color_quaternion(img: ImageBuffer) -> QTensor:
    data = np.zeros((1, 4, img.height, img.width))
    data[0, 1:] = img.pixels.transpose(2, 0, 1) / 255.0
    return QTensor(data)


def encode_gray_quaternion(img: ImageBuffer) -> QTensor:
    _check_gray(img)
    return encode_color_quaternion(img)


def encode_real(img: ImageBuffer, gray: bool = False) -> np.ndarray:
    """(3, H, W) float tensor; ``gray=True`` additionally requires R=G=B."""
    if gray:
        _check_gray(img)
    return img.pixels.transpose(2, 0, 1) / 255.0


def encode(img: ImageBuffer, kind: str) -> QTensor | np.ndarray:
    """Color encoding for the given model kind ("QCAE" or "CAE")."""
    return encode_color_quaternion(img) if kind == "QCAE" else encode_real(img)


def decode_to_image(t) -> ImageBuffer:
    """Inverse of the encoders: clamp to [0, 1], scale, round half-up.

    The real part of a quaternion tensor is discarded.
    """
    if isinstance(t, QTensor):
        if t.channels != 1:
            raise ShapeError(f"expected 1 quaternion channel, got {t.channels}")
        planes = t.data[0, 1:]
    else:
        planes = np.asarray(t, dtype=np.float64)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ShapeError(f"expected 3 real channels, got shape {planes.shape}")
    v = np.floor(np.clip(planes, 0.0, 1.0) * 255.0 + 0.5)
    return ImageBuffer(v.transpose(1, 2, 0).astype(np.uint8))


def center_crop(img: ImageBuffer, h: int, w: int) -> ImageBuffer:
    if h > img.height or w > img.width:
        raise ShapeError(f"cannot crop {img.height}x{img.width} image to {h}x{w}")
    i = (img.height - h) // 2
    j = (img.width - w) // 2
    return ImageBuffer(img.pixels[i:i + h, j:j + w].copy())
