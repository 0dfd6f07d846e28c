"""Reconstruction loss and the Adam optimizer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .qtensor import QTensor


def mse_loss(pred, target):
    """Mean squared error over every real component, and its gradient.

    Accepts two QTensors or two arrays of equal shape; the gradient has the
    same type as ``pred``.
    """
    p = pred.data if isinstance(pred, QTensor) else np.asarray(pred, dtype=np.float64)
    t = target.data if isinstance(target, QTensor) else np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} and target {t.shape} differ")
    diff = p - t
    n = diff.size
    loss = float(np.sum(diff * diff) / n)
    grad = diff * (2.0 / n)
    return loss, (QTensor(grad) if isinstance(pred, QTensor) else grad)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **hyper)


def adam_step(params, grads, state: AdamState):
    """One in-place Adam update with bias correction."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state lengths differ")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {p.shape} and gradient {g.shape} differ")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def adam_step_reference(params, grads, state: AdamState):
    """Scalar-loop Adam, kept as an independent check of :func:`adam_step`."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        pf, gf, mf, vf = p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1)
        for n in range(pf.size):
            gi = float(gf[n])
            mi = b1 * float(mf[n]) + (1.0 - b1) * gi
            vi = b2 * float(vf[n]) + (1.0 - b2) * (gi * gi)
            mf[n] = mi
            vf[n] = vi
            pf[n] = float(pf[n]) - state.lr * (mi / c1) / (math.sqrt(vi / c2) + state.eps)
    return params, state
