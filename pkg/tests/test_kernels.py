"""Compiled and numpy kernels must agree bitwise."""
import numpy as np
import pytest

from qcae import _kernels_py, backend

compiled = pytest.importorskip("qcae._kernels")

CASES = [((4, 16, 24), 3, 2, 1), ((3, 7, 9), 3, 1, 0), ((2, 5, 5), 3, 2, 1),
         ((1, 4, 4), 1, 1, 0), ((2, 6, 6), 3, 3, 2)]


@pytest.mark.parametrize("shape,k,stride,pad", CASES)
def test_im2col_agree(rng, shape, k, stride, pad):
    x = rng.standard_normal(shape)
    a = compiled.im2col(x, k, stride, pad)
    b = _kernels_py.im2col(x, k, stride, pad)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("shape,k,stride,pad", CASES)
def test_col2im_agree(rng, shape, k, stride, pad):
    cols = rng.standard_normal(_kernels_py.im2col(np.zeros(shape), k, stride, pad).shape)
    a = compiled.col2im(cols, *shape, k, stride, pad)
    b = _kernels_py.col2im(cols, *shape, k, stride, pad)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("shape,k,stride,pad", CASES)
def test_col2im_is_adjoint_of_im2col(rng, shape, k, stride, pad):
    x = rng.standard_normal(shape)
    cols = _kernels_py.im2col(x, k, stride, pad)
    y = rng.standard_normal(cols.shape)
    np.testing.assert_allclose(np.vdot(cols, y), np.vdot(x, _kernels_py.col2im(y, *shape, k, stride, pad)),
                               rtol=1e-12)


def test_backend_switch():
    original = backend.NAME
    try:
        backend.use("python")
        assert backend.NAME == "python"
        backend.use("compiled")
        assert backend.NAME == "compiled"
        with pytest.raises(ValueError):
            backend.use("fortran")
    finally:
        backend.use(original)
