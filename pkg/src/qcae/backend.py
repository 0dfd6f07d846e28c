"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. Set ``QCAE_BACKEND=python`` to force the fallback
or ``QCAE_BACKEND=compiled`` to fail loudly when the extension is missing.
"""
import os

import numpy as np

from . import _kernels_py

_requested = os.environ.get("QCAE_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _kernels_py
    NAME = "python"
else:
    try:
        from . import _kernels as _impl
        NAME = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _kernels_py
        NAME = "python"


def im2col(x, k, stride, pad):
    return _impl.im2col(np.ascontiguousarray(x, dtype=np.float64), k, stride, pad)


def col2im(cols, c, h, w, k, stride, pad):
    return _impl.col2im(cols, c, h, w, k, stride, pad)


def use(name):
    """Switch backend at runtime (used by the benchmark and tests)."""
    global _impl, NAME
    if name == "python":
        _impl, NAME = _kernels_py, "python"
    elif name == "compiled":
        from . import _kernels
        _impl, NAME = _kernels, "compiled"
    else:
        raise ValueError(f"unknown backend {name!r}")
