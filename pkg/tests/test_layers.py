import math

import numpy as np
import pytest

from qcae.errors import ShapeError
from qcae.gradcheck import REL_TOL, check_hardtanh, check_layer, check_mse, relative_error
from qcae.layers import (Hardtanh, LayerCache, QConvLayer, RealConvLayer, hardtanh_backward,
                         hardtanh_forward, init_quaternion_weights, init_real_weights,
                         qconv2d_backward, qconv2d_forward, qtconv2d_forward,
                         real_conv2d_forward, real_tconv2d_forward)
from qcae.qtensor import QTensor
from qcae.quat import Quaternion, hamilton, to_real_matrix

from conftest import random_qtensor
from oracles import naive_qconv2d, naive_qtconv2d, naive_real_conv2d, naive_real_tconv2d


def unit_qlayer(w, **kw):
    weight = np.array(w, dtype=np.float64).reshape(1, 1, 4, 1, 1)
    return QConvLayer(weight, np.zeros((1, 4)), **kw)


class TestQConvForward:
    def test_identity_kernel(self, rng):
        x = random_qtensor(rng, 1, 5, 4)
        out, _ = qconv2d_forward(x, unit_qlayer([1, 0, 0, 0]))
        assert out == x

    def test_i_kernel_on_gray_pixel(self):
        g = 0.4
        x = QTensor.zeros(1, 1, 1).set(0, 0, 0, Quaternion(0, g, g, g))
        out, _ = qconv2d_forward(x, unit_qlayer([0, 1, 0, 0]))
        expected = hamilton(Quaternion(0, 1, 0, 0), Quaternion(0, g, g, g))
        assert expected == Quaternion(-g, 0, -g, g)
        assert out.get(0, 0, 0) == expected

    def test_strided_matches_naive(self, rng):
        layer = QConvLayer.create(1, 1, 3, rng, stride=2, padding=1)
        layer.bias[:] = rng.standard_normal(layer.bias.shape)
        x = random_qtensor(rng, 1, 6, 6)
        out, _ = qconv2d_forward(x, layer)
        assert out.shape == (1, 3, 3)
        np.testing.assert_allclose(out.data, naive_qconv2d(x.data, layer.weight, layer.bias, 2, 1),
                                   atol=1e-12)

    @pytest.mark.parametrize("c_in,c_out,k,stride,pad", [(2, 3, 3, 1, 1), (3, 2, 1, 1, 0), (2, 2, 3, 2, 0)])
    def test_multichannel_matches_naive(self, rng, c_in, c_out, k, stride, pad):
        layer = QConvLayer.create(c_in, c_out, k, rng, stride=stride, padding=pad)
        layer.bias[:] = rng.standard_normal(layer.bias.shape)
        x = random_qtensor(rng, c_in, 7, 5)
        out, _ = qconv2d_forward(x, layer)
        np.testing.assert_allclose(out.data, naive_qconv2d(x.data, layer.weight, layer.bias, stride, pad),
                                   atol=1e-12)

    def test_channel_mismatch(self, rng):
        layer = QConvLayer.create(2, 1, 3, rng)
        with pytest.raises(ShapeError):
            qconv2d_forward(random_qtensor(rng, 1, 5, 5), layer)

    def test_output_too_small(self, rng):
        layer = QConvLayer.create(1, 1, 3, rng)
        with pytest.raises(ShapeError):
            qconv2d_forward(random_qtensor(rng, 1, 2, 2), layer)

    def test_structured_equivalence(self, rng):
        layer = QConvLayer.create(3, 2, 3, rng, stride=2, padding=1)
        layer.bias[:] = rng.standard_normal(layer.bias.shape)
        x = random_qtensor(rng, 3, 9, 8)
        q_out, _ = qconv2d_forward(x, layer)
        r_out, _ = layer.expand().forward(x.to_real_blocks())
        np.testing.assert_allclose(q_out.to_real_blocks(), r_out, atol=1e-12)

    def test_expanded_blocks_are_hamilton_matrices(self, rng):
        layer = QConvLayer.create(2, 2, 1, rng)
        big = layer.expand().weight[:, :, 0, 0]
        m = to_real_matrix(Quaternion.from_array(layer.weight[1, 0, :, 0, 0]))
        np.testing.assert_array_equal(big[1::2, 0::2], m)


class TestQTConvForward:
    def test_identity_kernel(self, rng):
        x = random_qtensor(rng, 1, 4, 3)
        out, _ = qtconv2d_forward(x, unit_qlayer([1, 0, 0, 0], transposed=True))
        assert out == x

    def test_output_size(self, rng):
        layer = QConvLayer.create(1, 1, 3, rng, stride=2, padding=1, transposed=True, output_padding=1)
        out, _ = qtconv2d_forward(random_qtensor(rng, 1, 3, 3), layer)
        assert out.shape == (1, 6, 6)

    def test_matches_naive_scatter(self, rng):
        layer = QConvLayer.create(3, 2, 3, rng, stride=2, padding=1, transposed=True, output_padding=1)
        layer.bias[:] = rng.standard_normal(layer.bias.shape)
        x = random_qtensor(rng, 3, 4, 3)
        out, _ = qtconv2d_forward(x, layer)
        np.testing.assert_allclose(out.data, naive_qtconv2d(x.data, layer.weight, layer.bias, 2, 1, 1),
                                   atol=1e-12)

    def test_output_padding_must_be_below_stride(self, rng):
        layer = QConvLayer.create(1, 1, 3, rng, stride=2, padding=1, transposed=True, output_padding=2)
        with pytest.raises(ShapeError):
            qtconv2d_forward(random_qtensor(rng, 1, 3, 3), layer)


def _adjoint_gap(rng, quaternion, c_in, c_out, k, stride, pad, h, w):
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    op = (h + 2 * pad - k) % stride
    assert op == (w + 2 * pad - k) % stride
    if quaternion:
        weight = rng.standard_normal((c_out, c_in, 4, k, k))
        u = random_qtensor(rng, c_in, h, w)
        v = random_qtensor(rng, c_out, ho, wo)
        conv = QConvLayer(weight, None, stride, pad)
        tconv = QConvLayer(weight, None, stride, pad, transposed=True, output_padding=op)
        lhs = conv.forward(u)[0].dot(v)
        rhs = u.dot(tconv.forward(v)[0])
    else:
        weight = rng.standard_normal((c_out, c_in, k, k))
        u = rng.standard_normal((c_in, h, w))
        v = rng.standard_normal((c_out, ho, wo))
        lhs = np.vdot(real_conv2d_forward(u, weight, None, stride, pad)[0], v)
        rhs = np.vdot(u, real_tconv2d_forward(v, weight, None, stride, pad, op)[0])
    return lhs, rhs


@pytest.mark.parametrize("quaternion", [True, False])
@pytest.mark.parametrize("geom", [(2, 3, 3, 2, 1, 6, 8), (1, 2, 3, 1, 1, 5, 5), (3, 1, 1, 1, 0, 4, 6),
                                  (2, 2, 3, 2, 1, 7, 7)])
def test_adjoint_identity(rng, quaternion, geom):
    lhs, rhs = _adjoint_gap(rng, quaternion, *geom)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


class TestRealConv:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((3, 5, 5))
        w = np.eye(3).reshape(3, 3, 1, 1)
        out, _ = real_conv2d_forward(x, w, None)
        np.testing.assert_array_equal(out, x)

    def test_matches_naive(self, rng):
        x = rng.standard_normal((3, 8, 8))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        for stride, pad in [(1, 0), (2, 1), (1, 1)]:
            out, _ = real_conv2d_forward(x, w, b, stride, pad)
            np.testing.assert_allclose(out, naive_real_conv2d(x, w, b, stride, pad), atol=1e-12)

    def test_transposed_matches_naive(self, rng):
        v = rng.standard_normal((4, 4, 4))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(3)
        out, _ = real_tconv2d_forward(v, w, b, 2, 1, 1)
        assert out.shape == (3, 8, 8)
        np.testing.assert_allclose(out, naive_real_tconv2d(v, w, b, 2, 1, 1), atol=1e-12)

    def test_transposed_identity(self, rng):
        v = rng.standard_normal((2, 3, 3))
        w = np.eye(2).reshape(2, 2, 1, 1)
        out, _ = real_tconv2d_forward(v, w, None)
        np.testing.assert_array_equal(out, v)


class TestHardtanh:
    def test_inside(self):
        y, cache = hardtanh_forward(np.array([0.5]))
        assert y[0] == 0.5
        assert hardtanh_backward(np.array([3.0]), cache)[0] == 3.0

    def test_saturated(self):
        y, cache = hardtanh_forward(np.array([2.0]))
        assert y[0] == 1.0
        assert hardtanh_backward(np.array([3.0]), cache)[0] == 0.0

    def test_boundary_gradient_is_zero(self):
        y, cache = hardtanh_forward(np.array([-1.0, 1.0]))
        np.testing.assert_array_equal(y, [-1.0, 1.0])
        np.testing.assert_array_equal(hardtanh_backward(np.ones(2), cache), [0.0, 0.0])

    def test_qtensor_input(self, rng):
        t = random_qtensor(rng, 2, 3, 3).scale(3.0)
        y, cache = Hardtanh().forward(t)
        assert isinstance(y, QTensor)
        assert y.data.max() <= 1.0 and y.data.min() >= -1.0
        g, grads = Hardtanh().backward(QTensor(np.ones_like(t.data)), cache)
        assert grads == {}
        np.testing.assert_array_equal(g.data, (np.abs(t.data) < 1).astype(float))


class TestBackward:
    def test_zero_grad_output(self, rng):
        layer = QConvLayer.create(2, 2, 3, rng, padding=1)
        out, cache = layer.forward(random_qtensor(rng, 2, 4, 4))
        gx, grads = layer.backward(QTensor(np.zeros_like(out.data)), cache)
        assert not gx.data.any() and not grads["weight"].any() and not grads["bias"].any()

    def test_scalar_weight_gradient_closed_form(self, rng):
        """d/dw of <g, w ⊗ p> is M_right(p)^T g, where w ⊗ p = R(p) w."""
        w = rng.standard_normal(4)
        p = rng.standard_normal(4)
        g = rng.standard_normal(4)
        layer = unit_qlayer(w)
        x = QTensor(p.reshape(1, 4, 1, 1))
        out, cache = layer.forward(x)
        _, gw, _ = qconv2d_backward(QTensor(g.reshape(1, 4, 1, 1)), cache, layer)
        # right-multiplication matrix: column c is basis_c ⊗ p
        basis = np.eye(4)
        right = np.stack([hamilton(Quaternion(*basis[c]), Quaternion(*p)).as_array() for c in range(4)], axis=1)
        np.testing.assert_allclose(gw.reshape(4), right.T @ g, atol=1e-12)

    def test_backward_shape_mismatch(self, rng):
        layer = QConvLayer.create(1, 1, 3, rng, padding=1)
        _, cache = layer.forward(random_qtensor(rng, 1, 4, 4))
        with pytest.raises(ShapeError):
            layer.backward(QTensor.zeros(1, 3, 3), cache)

    def test_qconv_finite_differences(self, rng):
        layer = QConvLayer.create(2, 2, 3, rng, padding=1)
        layer.bias[:] = rng.standard_normal(layer.bias.shape)
        for r in check_layer("qconv", layer, random_qtensor(rng, 2, 4, 4), rng):
            assert r.max_rel_error < REL_TOL, r

    def test_qtconv_finite_differences(self, rng):
        layer = QConvLayer.create(2, 3, 3, rng, stride=2, padding=1, transposed=True, output_padding=1)
        for r in check_layer("qtconv", layer, random_qtensor(rng, 2, 3, 3), rng):
            assert r.max_rel_error < REL_TOL, r

    @pytest.mark.parametrize("transposed", [False, True])
    def test_real_finite_differences(self, rng, transposed):
        layer = RealConvLayer.create(3, 2, 3, rng, stride=2, padding=1, transposed=transposed,
                                     output_padding=1 if transposed else 0)
        x = rng.standard_normal((3, 4, 4) if transposed else (3, 7, 7))
        for r in check_layer("real", layer, x, rng):
            assert r.max_rel_error < REL_TOL, r

    def test_hardtanh_and_mse_finite_differences(self, rng):
        for r in check_hardtanh(rng) + check_mse(rng):
            assert r.max_rel_error < REL_TOL, r

    def test_relative_error_floor(self):
        assert relative_error([1e-12], [0.0]) < 1e-5
        assert relative_error([1.0], [1.1]) == pytest.approx(0.1 / 1.1)


class TestInit:
    def test_deterministic(self):
        a = init_quaternion_weights(4, 3, 3, 7)
        b = init_quaternion_weights(4, 3, 3, 7)
        assert a.tobytes() == b.tobytes()
        assert a.shape == (4, 3, 4, 3, 3)

    def test_unit_imaginary_direction(self):
        w = init_quaternion_weights(8, 8, 3, 3)
        imag = np.moveaxis(w[:, :, 1:], 2, -1)
        norms = np.linalg.norm(imag, axis=-1)
        # direction of the vector part is the drawn unit u (up to the sign of sin theta)
        u = imag / norms[..., None]
        np.testing.assert_allclose(np.sum(u * u, axis=-1), 1.0, atol=1e-12)

    def test_component_variance(self):
        """Monte-Carlo oracle: sample the polar construction directly."""
        c_out, c_in, k = 100, 100, 10  # 10^6 weights
        w = init_quaternion_weights(c_out, c_in, k, 11)
        sigma = 1.0 / math.sqrt(2 * (c_in * k * k + c_out * k * k))

        oracle = np.random.default_rng(99)
        n = 10 ** 5
        phi = sigma * np.sqrt(-2 * np.log(1 - oracle.random(n)))
        theta = oracle.uniform(-math.pi, math.pi, n)
        u = oracle.standard_normal((n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        ref = np.column_stack([phi * np.cos(theta), (phi * np.sin(theta))[:, None] * u])

        got = np.moveaxis(w, 2, -1).reshape(-1, 4)[:n]
        for comp in range(4):
            assert abs(got[:, comp].var() - ref[:, comp].var()) < 0.1 * ref[:, comp].var()
        assert abs(got[:, 0].var() - sigma ** 2) < 0.1 * sigma ** 2
        for comp in (1, 2, 3):
            assert abs(got[:, comp].var() - sigma ** 2 / 3) < 0.1 * sigma ** 2 / 3

    def test_real_init_variance_matches_expanded_quaternion(self):
        q = QConvLayer.create(40, 40, 3, 5)
        r = RealConvLayer.create(160, 160, 3, 5)
        vq = q.expand().weight.var()
        vr = r.weight.var()
        assert abs(vq - vr) < 0.05 * vr

    def test_bias_starts_at_zero(self, rng):
        assert not QConvLayer.create(2, 3, 3, rng).bias.any()
        assert not RealConvLayer.create(2, 3, 3, rng).bias.any()


class TestParameterCount:
    def test_qconv_count(self, rng):
        layer = QConvLayer.create(1, 8, 3, rng)
        assert layer.parameter_count() == 4 * (8 * 1 * 9 + 8) == 320
        assert layer.weight.size == 4 * 8 * 1 * 9

    def test_real_count(self, rng):
        assert RealConvLayer.create(3, 32, 3, rng).parameter_count() == 3 * 32 * 9 + 32

    def test_expanded_has_four_times_the_weights(self, rng):
        layer = QConvLayer.create(8, 16, 3, rng)
        assert layer.expand().weight.size == 16 * 8 * 16 * 9 == 4 * layer.weight.size
