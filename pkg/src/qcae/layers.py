"""Convolution layers with hand-written reverse-mode gradients.

Real layers work on float64 arrays of shape (C, H, W). Quaternion layers
work on :class:`QTensor` and are computed through the real block-matrix form
of their kernels: every quaternion weight w becomes the 4x4 block M(w), so a
quaternion convolution is one real convolution over the component-major real
layout. Batch size is always one.

Transposed layers are the exact adjoint of the forward convolution with the
same kernel, stride and padding. Their kernels are stored (C_in, C_out, K, K),
i.e. with the shape of the convolution they are the adjoint of.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import backend
from .errors import ShapeError
from .qtensor import QTensor
from .quat import expand_kernel, fold_kernel_grad


@dataclass
class LayerCache:
    """What a backward pass needs from its forward call."""
    input: Any
    output: Any
    cols: np.ndarray | None = None


def conv_output_size(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def tconv_output_size(n, k, stride, pad, output_padding):
    return (n - 1) * stride - 2 * pad + k + output_padding


# ---------------------------------------------------------------------------
# real kernels


def real_conv2d_forward(x, weight, bias, stride=1, padding=0):
    c_out, c_in, k, k2 = weight.shape
    if x.ndim != 3 or x.shape[0] != c_in:
        raise ShapeError(f"input {x.shape} does not match kernel with {c_in} input channels")
    ho = conv_output_size(x.shape[1], k, stride, padding)
    wo = conv_output_size(x.shape[2], k2, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"input {x.shape[1:]} too small for kernel {k} with padding {padding}")
    cols = backend.im2col(x, k, stride, padding)
    out = weight.reshape(c_out, -1) @ cols
    if bias is not None:
        out += bias[:, None]
    out = out.reshape(c_out, ho, wo)
    return out, LayerCache(x, out, cols)


def real_conv2d_backward(grad_out, cache, weight, stride=1, padding=0, with_bias=True):
    c_out, c_in, k, _ = weight.shape
    if grad_out.shape != cache.output.shape:
        raise ShapeError(f"gradient {grad_out.shape} does not match output {cache.output.shape}")
    g = grad_out.reshape(c_out, -1)
    grad_w = (g @ cache.cols.T).reshape(weight.shape)
    grad_b = g.sum(axis=1) if with_bias else None
    gcols = weight.reshape(c_out, -1).T @ g
    _, h, w = cache.input.shape
    grad_x = backend.col2im(gcols, c_in, h, w, k, stride, padding)
    return grad_x, grad_w, grad_b


def real_tconv2d_forward(x, weight, bias, stride=1, padding=0, output_padding=0):
    c_in, c_out, k, _ = weight.shape
    if x.ndim != 3 or x.shape[0] != c_in:
        raise ShapeError(f"input {x.shape} does not match kernel with {c_in} input channels")
    if not 0 <= output_padding < stride:
        raise ShapeError(f"output_padding must lie in [0, stride), got {output_padding}")
    _, h, w = x.shape
    ho = tconv_output_size(h, k, stride, padding, output_padding)
    wo = tconv_output_size(w, k, stride, padding, output_padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"transposed output size {(ho, wo)} is empty")
    cols = weight.reshape(c_in, -1).T @ x.reshape(c_in, -1)
    out = backend.col2im(cols, c_out, ho, wo, k, stride, padding)
    if bias is not None:
        out += bias[:, None, None]
    return out, LayerCache(x, out)


def real_tconv2d_backward(grad_out, cache, weight, stride=1, padding=0, with_bias=True):
    c_in, c_out, k, _ = weight.shape
    if grad_out.shape != cache.output.shape:
        raise ShapeError(f"gradient {grad_out.shape} does not match output {cache.output.shape}")
    gcols = backend.im2col(grad_out, k, stride, padding)
    x = cache.input.reshape(c_in, -1)
    wm = weight.reshape(c_in, -1)
    grad_x = (wm @ gcols).reshape(cache.input.shape)
    grad_w = (x @ gcols.T).reshape(weight.shape)
    grad_b = grad_out.sum(axis=(1, 2)) if with_bias else None
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# activation


def hardtanh_forward(x):
    """Clamp to [-1, 1]. Accepts arrays or QTensors (split semantics)."""
    y = QTensor(np.clip(x.data, -1.0, 1.0)) if isinstance(x, QTensor) else np.clip(x, -1.0, 1.0)
    return y, LayerCache(x, y)


def hardtanh_backward(grad, cache):
    """Pass the gradient strictly inside (-1, 1); zero elsewhere, boundary included."""
    pre = cache.input.data if isinstance(cache.input, QTensor) else cache.input
    g = grad.data if isinstance(grad, QTensor) else grad
    out = np.where((pre > -1.0) & (pre < 1.0), g, 0.0)
    return QTensor(out) if isinstance(grad, QTensor) else out


def hardtanh(v: float) -> float:
    return min(1.0, max(-1.0, v))


# ---------------------------------------------------------------------------
# initialisation


def init_quaternion_weights(c_out, c_in, k, rng_seed, fan_in=None, fan_out=None):
    """Polar quaternion initialisation.

    Each weight is phi * (cos t + u sin t) with phi ~ Rayleigh(sigma),
    t ~ U[-pi, pi] and u a uniform random unit pure quaternion, where
    sigma = 1 / sqrt(2 (fan_in + fan_out)) and fans count quaternion units.
    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    Returns an array of shape (c_out, c_in, 4, k, k).
    """
    if min(c_out, c_in, k) < 1:
        raise ShapeError("kernel dimensions must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    fan_in = c_in * k * k if fan_in is None else fan_in
    fan_out = c_out * k * k if fan_out is None else fan_out
    sigma = 1.0 / math.sqrt(2.0 * (fan_in + fan_out))
    shape = (c_out, c_in, k, k)
    phi = rng.rayleigh(scale=sigma, size=shape)
    u = rng.standard_normal(size=shape + (3,))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    theta = rng.uniform(-math.pi, math.pi, size=shape)
    s = phi * np.sin(theta)
    w = np.stack([phi * np.cos(theta), s * u[..., 0], s * u[..., 1], s * u[..., 2]], axis=2)
    return w


def init_real_weights(c_out, c_in, k, rng_seed, fan_in=None, fan_out=None):
    """Gaussian real kernel of shape (c_out, c_in, k, k).

    The variance 1 / (fan_in + fan_out) equals the mean per-scalar variance
    of an expanded quaternion kernel with the same real fans, so both model
    kinds start from comparably scaled weights.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    fan_in = c_in * k * k if fan_in is None else fan_in
    fan_out = c_out * k * k if fan_out is None else fan_out
    return rng.normal(0.0, math.sqrt(1.0 / (fan_in + fan_out)), size=(c_out, c_in, k, k))


# ---------------------------------------------------------------------------
# layer objects


class RealConvLayer:
    """Real (transposed) convolution with bias."""

    def __init__(self, weight, bias=None, stride=1, padding=0, transposed=False,
                 output_padding=0):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.transposed = transposed
        n_out = self.weight.shape[1] if transposed else self.weight.shape[0]
        self.bias = None if bias is None else np.asarray(bias, dtype=np.float64)
        if self.bias is not None and self.bias.shape != (n_out,):
            raise ShapeError(f"bias shape {self.bias.shape} != ({n_out},)")
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding

    @classmethod
    def create(cls, c_in, c_out, k, rng, stride=1, padding=0, transposed=False,
               output_padding=0, bias=True):
        if transposed:
            w = init_real_weights(c_in, c_out, k, rng, fan_in=c_in * k * k, fan_out=c_out * k * k)
        else:
            w = init_real_weights(c_out, c_in, k, rng)
        return cls(w, np.zeros(c_out) if bias else None, stride, padding, transposed, output_padding)

    @property
    def in_channels(self):
        return self.weight.shape[0] if self.transposed else self.weight.shape[1]

    @property
    def out_channels(self):
        return self.weight.shape[1] if self.transposed else self.weight.shape[0]

    @property
    def kernel_size(self):
        return self.weight.shape[2]

    def parameters(self):
        p = {"weight": self.weight}
        if self.bias is not None:
            p["bias"] = self.bias
        return p

    def parameter_count(self):
        return sum(v.size for v in self.parameters().values())

    def forward(self, x):
        if self.transposed:
            return real_tconv2d_forward(x, self.weight, self.bias, self.stride,
                                        self.padding, self.output_padding)
        return real_conv2d_forward(x, self.weight, self.bias, self.stride, self.padding)

    def backward(self, grad, cache):
        fn = real_tconv2d_backward if self.transposed else real_conv2d_backward
        gx, gw, gb = fn(grad, cache, self.weight, self.stride, self.padding,
                        with_bias=self.bias is not None)
        grads = {"weight": gw}
        if gb is not None:
            grads["bias"] = gb
        return gx, grads

    def __repr__(self):
        kind = "RealTConv" if self.transposed else "RealConv"
        return f"{kind}({self.in_channels}->{self.out_channels}, k={self.kernel_size}, s={self.stride})"


class QConvLayer:
    """Quaternion (transposed) convolution.

    ``weight`` has shape (C_out, C_in, 4, K, K) for a forward convolution and
    (C_in, C_out, 4, K, K) for a transposed one; ``bias`` has shape (C_out, 4).
    Forward output is ``bias[o] + sum w[o, i] ⊗ x[i]`` over input channels and
    kernel taps.
    """

    def __init__(self, weight, bias=None, stride=1, padding=0, transposed=False,
                 output_padding=0):
        self.weight = np.asarray(weight, dtype=np.float64)
        if self.weight.ndim != 5 or self.weight.shape[2] != 4:
            raise ShapeError(f"quaternion kernel must be (A, B, 4, K, K), got {self.weight.shape}")
        self.transposed = transposed
        n_out = self.weight.shape[1] if transposed else self.weight.shape[0]
        self.bias = None if bias is None else np.asarray(bias, dtype=np.float64)
        if self.bias is not None and self.bias.shape != (n_out, 4):
            raise ShapeError(f"bias shape {self.bias.shape} != ({n_out}, 4)")
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding

    @classmethod
    def create(cls, c_in, c_out, k, rng, stride=1, padding=0, transposed=False,
               output_padding=0, bias=True):
        if transposed:
            w = init_quaternion_weights(c_in, c_out, k, rng, fan_in=c_in * k * k,
                                        fan_out=c_out * k * k)
        else:
            w = init_quaternion_weights(c_out, c_in, k, rng)
        return cls(w, np.zeros((c_out, 4)) if bias else None, stride, padding, transposed,
                   output_padding)

    @property
    def in_channels(self):
        return self.weight.shape[0] if self.transposed else self.weight.shape[1]

    @property
    def out_channels(self):
        return self.weight.shape[1] if self.transposed else self.weight.shape[0]

    @property
    def kernel_size(self):
        return self.weight.shape[3]

    def parameters(self):
        p = {"weight": self.weight}
        if self.bias is not None:
            p["bias"] = self.bias
        return p

    def parameter_count(self):
        return sum(v.size for v in self.parameters().values())

    def real_bias(self):
        return None if self.bias is None else self.bias.T.reshape(-1)

    def expand(self) -> RealConvLayer:
        """Equivalent real layer over the component-major real block layout."""
        return RealConvLayer(expand_kernel(self.weight), self.real_bias(), self.stride,
                             self.padding, self.transposed, self.output_padding)

    def forward(self, x: QTensor):
        return (qtconv2d_forward if self.transposed else qconv2d_forward)(x, self)

    def backward(self, grad: QTensor, cache):
        fn = qtconv2d_backward if self.transposed else qconv2d_backward
        gx, gw, gb = fn(grad, cache, self)
        grads = {"weight": gw}
        if gb is not None:
            grads["bias"] = gb
        return gx, grads

    def __repr__(self):
        kind = "QTConv" if self.transposed else "QConv"
        return f"{kind}({self.in_channels}->{self.out_channels}, k={self.kernel_size}, s={self.stride})"


def _check_qinput(x, layer):
    if not isinstance(x, QTensor):
        raise ShapeError(f"quaternion layer expects a QTensor, got {type(x).__name__}")
    if x.channels != layer.in_channels:
        raise ShapeError(f"input has {x.channels} quaternion channels, layer expects {layer.in_channels}")


def qconv2d_forward(x: QTensor, layer: QConvLayer):
    _check_qinput(x, layer)
    wr = expand_kernel(layer.weight)
    out, cache = real_conv2d_forward(x.to_real_blocks(), wr, layer.real_bias(),
                                     layer.stride, layer.padding)
    return QTensor.from_real_blocks(out), cache


def qtconv2d_forward(x: QTensor, layer: QConvLayer):
    _check_qinput(x, layer)
    wr = expand_kernel(layer.weight)
    out, cache = real_tconv2d_forward(x.to_real_blocks(), wr, layer.real_bias(),
                                      layer.stride, layer.padding, layer.output_padding)
    return QTensor.from_real_blocks(out), cache


def _q_backward(real_fn, grad, cache, layer):
    if not isinstance(grad, QTensor):
        raise ShapeError("quaternion backward expects a QTensor gradient")
    wr = expand_kernel(layer.weight)
    gx, gw, gb = real_fn(grad.to_real_blocks(), cache, wr, layer.stride, layer.padding,
                         with_bias=layer.bias is not None)
    gb_q = None if gb is None else gb.reshape(4, -1).T.copy()
    return QTensor.from_real_blocks(gx), fold_kernel_grad(gw), gb_q


def qconv2d_backward(grad: QTensor, cache: LayerCache, layer: QConvLayer):
    return _q_backward(real_conv2d_backward, grad, cache, layer)


def qtconv2d_backward(grad: QTensor, cache: LayerCache, layer: QConvLayer):
    return _q_backward(real_tconv2d_backward, grad, cache, layer)


class Hardtanh:
    """Split hardtanh as a parameter-free layer."""

    def parameters(self):
        return {}

    def parameter_count(self):
        return 0

    def forward(self, x):
        return hardtanh_forward(x)

    def backward(self, grad, cache):
        return hardtanh_backward(grad, cache), {}

    def __repr__(self):
        return "Hardtanh()"
