"""Quaternion feature-map container."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import BoundsError, ShapeError
from .quat import Quaternion


class QTensor:
    """A C x H x W grid of quaternions.

    Storage is a float64 array of shape (C, 4, H, W): each quaternion channel
    owns four contiguous planes in (r, x, y, z) order.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 4 or data.shape[1] != 4:
            raise ShapeError(f"expected (C, 4, H, W) data, got {data.shape}")
        if min(data.shape) < 1:
            raise ShapeError(f"empty dimension in {data.shape}")
        self.data = data

    @classmethod
    def zeros(cls, c: int, h: int, w: int) -> "QTensor":
        if c < 1 or h < 1 or w < 1:
            raise ShapeError(f"dimensions must be positive, got {(c, h, w)}")
        return cls(np.zeros((c, 4, h, w)))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def __len__(self):
        return self.data.size

    def __repr__(self):
        return f"QTensor(channels={self.channels}, height={self.height}, width={self.width})"

    def __eq__(self, other):
        if not isinstance(other, QTensor):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def copy(self) -> "QTensor":
        return QTensor(self.data.copy())

    def _check_index(self, c, i, j):
        for idx, n, name in ((c, self.channels, "channel"), (i, self.height, "row"),
                             (j, self.width, "column")):
            if not 0 <= idx < n:
                raise BoundsError(f"{name} index {idx} out of range [0, {n})")

    def get(self, c: int, i: int, j: int) -> Quaternion:
        self._check_index(c, i, j)
        return Quaternion.from_array(self.data[c, :, i, j])

    def set(self, c: int, i: int, j: int, q: Quaternion) -> "QTensor":
        """Store ``q`` in place and return ``self``."""
        self._check_index(c, i, j)
        self.data[c, :, i, j] = (q.r, q.x, q.y, q.z)
        return self

    def to_real_blocks(self) -> np.ndarray:
        """Real tensor (4C, H, W): channel k holds component k // C of
        quaternion channel k % C."""
        c, _, h, w = self.data.shape
        return np.ascontiguousarray(self.data.transpose(1, 0, 2, 3)).reshape(4 * c, h, w)

    @classmethod
    def from_real_blocks(cls, arr: np.ndarray) -> "QTensor":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] % 4:
            raise ShapeError(f"real block tensor needs 4k channels, got shape {arr.shape}")
        c4, h, w = arr.shape
        return cls(np.ascontiguousarray(arr.reshape(4, c4 // 4, h, w).transpose(1, 0, 2, 3)))

    def _same_shape(self, other: "QTensor"):
        if self.data.shape != other.data.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")

    def add(self, other: "QTensor") -> "QTensor":
        self._same_shape(other)
        return QTensor(self.data + other.data)

    def sub(self, other: "QTensor") -> "QTensor":
        self._same_shape(other)
        return QTensor(self.data - other.data)

    def scale(self, k: float) -> "QTensor":
        return QTensor(self.data * k)

    def hadamard(self, other: "QTensor") -> "QTensor":
        """Component-wise product (not the Hamilton product)."""
        self._same_shape(other)
        return QTensor(self.data * other.data)

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "QTensor":
        """Apply ``f`` to every real component. ``f`` must be vectorised."""
        return QTensor(f(self.data))

    def dot(self, other: "QTensor") -> float:
        """Inner product over all real components."""
        self._same_shape(other)
        return float(np.vdot(self.data, other.data))
