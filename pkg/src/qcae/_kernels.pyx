# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled im2col / col2im.

Same contract and the same per-pixel accumulation order as ``_kernels_py``,
so both backends produce bitwise-identical results.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def im2col(double[:, :, ::1] x, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t ho = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (w + 2 * pad - k) // stride + 1
    out = np.empty((c * k * k, ho * wo), dtype=np.float64)
    cdef double[:, ::1] cols = out
    cdef Py_ssize_t ci, ki, kj, oh, ow, row, ih, iw
    with nogil:
        for ci in range(c):
            for ki in range(k):
                for kj in range(k):
                    row = (ci * k + ki) * k + kj
                    for oh in range(ho):
                        ih = oh * stride + ki - pad
                        if ih < 0 or ih >= h:
                            for ow in range(wo):
                                cols[row, oh * wo + ow] = 0.0
                            continue
                        for ow in range(wo):
                            iw = ow * stride + kj - pad
                            if iw < 0 or iw >= w:
                                cols[row, oh * wo + ow] = 0.0
                            else:
                                cols[row, oh * wo + ow] = x[ci, ih, iw]
    return out


def col2im(cols_in, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
           Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t ho = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (w + 2 * pad - k) // stride + 1
    cdef double[:, ::1] cols = np.ascontiguousarray(cols_in, dtype=np.float64).reshape(c * k * k, ho * wo)
    out = np.zeros((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] x = out
    cdef Py_ssize_t ci, ki, kj, oh, ow, row, ih, iw
    with nogil:
        for ci in range(c):
            for ki in range(k):
                for kj in range(k):
                    row = (ci * k + ki) * k + kj
                    for oh in range(ho):
                        ih = oh * stride + ki - pad
                        if ih < 0 or ih >= h:
                            continue
                        for ow in range(wo):
                            iw = ow * stride + kj - pad
                            if iw >= 0 and iw < w:
                                x[ci, ih, iw] += cols[row, oh * wo + ow]
    return out
