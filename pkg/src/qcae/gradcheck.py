"""Central finite-difference checks of every hand-written backward pass.

Each check contracts the operator output with a fixed random tensor, so the
scalar objective has O(1) gradients, then compares every analytic gradient
entry against (f(p + eps) - f(p - eps)) / (2 eps).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import QConvLayer, RealConvLayer, hardtanh_backward, hardtanh_forward
from .model import ModelConfig, build_model
from .optim import mse_loss
from .qtensor import QTensor

EPS = 1e-5
REL_TOL = 1e-4
# entries whose gradient magnitude is below this are compared absolutely
FLOOR = 1e-6


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    entries: int

    @property
    def passed(self):
        return self.max_rel_error < REL_TOL


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), FLOOR)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_gradient(f, p, eps=EPS):
    """Central differences of scalar ``f()`` with respect to array ``p`` (perturbed in place)."""
    g = np.zeros_like(p)
    flat, gflat = p.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def _raw(t):
    return t.data if isinstance(t, QTensor) else t


def check_layer(name, layer, x, rng, eps=EPS):
    """Check input, weight and bias gradients of one layer."""
    out, cache = layer.forward(x)
    proj = rng.standard_normal(_raw(out).shape)
    grad_out = QTensor(proj.copy()) if isinstance(out, QTensor) else proj.copy()
    gx, grads = layer.backward(grad_out, cache)

    def objective():
        y, _ = layer.forward(x)
        return float(np.sum(_raw(y) * proj))

    results = [CheckResult(f"{name}/input", relative_error(_raw(gx), numeric_gradient(objective, _raw(x), eps)),
                           _raw(x).size)]
    for pname, p in layer.parameters().items():
        results.append(CheckResult(f"{name}/{pname}",
                                   relative_error(grads[pname], numeric_gradient(objective, p, eps)),
                                   p.size))
    return results


def check_hardtanh(rng, n=64, eps=EPS):
    # keep samples well away from the kinks at +-1
    x = rng.uniform(-2.0, 2.0, size=(2, 4, 4))
    near = np.abs(np.abs(x) - 1.0) < 10 * eps
    x[near] = 0.5
    proj = rng.standard_normal(x.shape)
    _, cache = hardtanh_forward(x)
    ga = hardtanh_backward(proj, cache)

    def objective():
        return float(np.sum(hardtanh_forward(x)[0] * proj))

    return [CheckResult("hardtanh/input", relative_error(ga, numeric_gradient(objective, x, eps)), x.size)]


def check_mse(rng, eps=EPS):
    pred = rng.standard_normal((2, 4, 3, 3))
    target = rng.standard_normal(pred.shape)
    _, g = mse_loss(QTensor(pred), QTensor(target))
    num = numeric_gradient(lambda: mse_loss(QTensor(pred), QTensor(target))[0], pred, eps)
    return [CheckResult("mse/pred", relative_error(g.data, num), pred.size)]


def check_model(kind, rng, eps=EPS, size=8):
    """End-to-end check through a small encoder-decoder with MSE loss."""
    widths = (2, 3) if kind == "QCAE" else (3, 4)
    cfg = ModelConfig(kind=kind, widths=widths)
    for attempt in range(20):
        model = build_model(cfg, int(rng.integers(2 ** 31)))
        if kind == "QCAE":
            x = QTensor(rng.uniform(0, 1, size=(1, 4, size, size)))
        else:
            x = rng.uniform(0, 1, size=(3, size, size))
        model.forward(x)
        pre = [_raw(c.input) for layer, c in zip(model.layers, model._caches)
               if type(layer).__name__ == "Hardtanh"]
        if all(np.min(np.abs(np.abs(p) - 1.0)) > 100 * eps for p in pre):
            break
    target = x.copy()
    y = model.forward(x)
    _, g = mse_loss(y, target)
    gx, grads = model.backward(g)

    def objective():
        return mse_loss(model.forward(x), target)[0]

    results = [CheckResult(f"{kind}-model/input",
                           relative_error(_raw(gx), numeric_gradient(objective, _raw(x), eps)),
                           _raw(x).size)]
    for (pname, p), ga in zip(model.named_parameters(), grads):
        results.append(CheckResult(f"{kind}-model/{pname}",
                                   relative_error(ga, numeric_gradient(objective, p, eps)), p.size))
    return results


def run_all(seed=0, eps=EPS):
    """Every layer type, activation, loss and both model kinds."""
    rng = np.random.default_rng(seed)
    results = []
    q = QConvLayer.create(2, 2, 3, rng, stride=1, padding=1)
    q.bias[:] = rng.standard_normal(q.bias.shape)
    results += check_layer("qconv2d", q, QTensor(rng.standard_normal((2, 4, 4, 4))), rng, eps)
    q = QConvLayer.create(2, 3, 3, rng, stride=2, padding=1)
    results += check_layer("qconv2d-strided", q, QTensor(rng.standard_normal((2, 4, 5, 5))), rng, eps)
    qt = QConvLayer.create(2, 2, 3, rng, stride=2, padding=1, transposed=True, output_padding=1)
    qt.bias[:] = rng.standard_normal(qt.bias.shape)
    results += check_layer("qtconv2d", qt, QTensor(rng.standard_normal((2, 4, 3, 3))), rng, eps)
    r = RealConvLayer.create(3, 4, 3, rng, stride=2, padding=1)
    r.bias[:] = rng.standard_normal(r.bias.shape)
    results += check_layer("real_conv2d", r, rng.standard_normal((3, 6, 6)), rng, eps)
    rt = RealConvLayer.create(4, 3, 3, rng, stride=2, padding=1, transposed=True, output_padding=1)
    rt.bias[:] = rng.standard_normal(rt.bias.shape)
    results += check_layer("real_tconv2d", rt, rng.standard_normal((4, 3, 3)), rng, eps)
    results += check_hardtanh(rng, eps=eps)
    results += check_mse(rng, eps)
    results += check_model("QCAE", rng, eps)
    results += check_model("CAE", rng, eps)
    return results
