"""Quaternion scalar algebra.

Component order is (r, x, y, z) everywhere in the package: the real part
first, then the coefficients of i, j and k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True, slots=True)
class Quaternion:
    r: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        r, x, y, z = (float(v) for v in a)
        return cls(r, x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.x, self.y, self.z], dtype=np.float64)

    def __iter__(self):
        return iter((self.r, self.x, self.y, self.z))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.r + other.r, self.x + other.x,
                          self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.r - other.r, self.x - other.x,
                          self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.r, -self.x, -self.y, -self.z)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return hamilton(self, other)

    def conj(self) -> "Quaternion":
        return Quaternion(self.r, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return math.sqrt(self.r * self.r + self.x * self.x
                         + self.y * self.y + self.z * self.z)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self)


ONE = Quaternion(1.0, 0.0, 0.0, 0.0)
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def hamilton(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a ⊗ b``."""
    r1, x1, y1, z1 = a.r, a.x, a.y, a.z
    r2, x2, y2, z2 = b.r, b.x, b.y, b.z
    return Quaternion(
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
        r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
        r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
    )


def hamilton_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised Hamilton product over the last axis (length 4)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    r1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    r2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack([
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
        r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
        r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
    ], axis=-1)


# Left-multiplication matrix of q: entry (a, b) is SIGN[a, b] * q[INDEX[a, b]].
# Row a is output component a of q ⊗ p, column b multiplies component b of p.
INDEX = np.array([
    [0, 1, 2, 3],
    [1, 0, 3, 2],
    [2, 3, 0, 1],
    [3, 2, 1, 0],
])
SIGN = np.array([
    [1.0, -1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0, 1.0],
])


def to_real_matrix(q: Quaternion) -> np.ndarray:
    """4x4 real matrix M(q) with ``M(q) @ p.as_array() == (q ⊗ p).as_array()``."""
    return SIGN * q.as_array()[INDEX]


def split_apply(f: Callable[[float], float], q: Quaternion) -> Quaternion:
    """Apply a real function to each component independently."""
    return Quaternion(f(q.r), f(q.x), f(q.y), f(q.z))


def expand_kernel(w: np.ndarray) -> np.ndarray:
    """Real block kernel of a quaternion kernel bank.

    ``w`` has shape (A, B, 4, K, K): A*B quaternion filters. The result has
    shape (4A, 4B, K, K) with row ``a*A + o`` and column ``b*B + i`` holding
    ``M(w[o, i])[a, b]``, matching the component-major real-block layout of
    :meth:`qcae.qtensor.QTensor.to_real_blocks`.
    """
    A, B, _, kh, kw = w.shape
    comp = np.moveaxis(w, 2, 0)
    out = np.empty((4, A, 4, B, kh, kw), dtype=np.float64)
    for a in range(4):
        for b in range(4):
            out[a, :, b] = SIGN[a, b] * comp[INDEX[a, b]]
    return out.reshape(4 * A, 4 * B, kh, kw)


def fold_kernel_grad(g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`expand_kernel`: collapse a real block-kernel gradient
    of shape (4A, 4B, K, K) onto the (A, B, 4, K, K) quaternion weights."""
    A4, B4, kh, kw = g.shape
    A, B = A4 // 4, B4 // 4
    blocks = g.reshape(4, A, 4, B, kh, kw)
    out = np.zeros((4, A, B, kh, kw), dtype=np.float64)
    for a in range(4):
        for b in range(4):
            out[INDEX[a, b]] += SIGN[a, b] * blocks[a, :, b]
    return np.moveaxis(out, 0, 2).copy()
