"""Pure numpy im2col / col2im, the fallback when the compiled core is absent."""
import numpy as np


def im2col(x, k, stride, pad):
    """Unfold (C, H, W) into a (C*k*k, Ho*Wo) patch matrix."""
    c, h, w = x.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((c, k, k, ho, wo), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            cols[:, ki, kj] = xp[:, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride]
    return cols.reshape(c * k * k, ho * wo)


def col2im(cols, c, h, w, k, stride, pad):
    """Scatter-add a (C*k*k, Ho*Wo) patch matrix back onto (C, H, W).

    Contributions to each pixel are accumulated in (ki, kj) row-major order.
    """
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    cols = cols.reshape(c, k, k, ho, wo)
    xp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            xp[:, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += cols[:, ki, kj]
    if pad:
        return xp[:, pad:pad + h, pad:pad + w].copy()
    return xp
