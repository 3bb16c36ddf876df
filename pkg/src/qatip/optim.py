"""Adam with bias correction, plus global gradient-norm clipping."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter, Tensor


def _tensors(params) -> list[Tensor]:
    return [p.tensor if isinstance(p, Parameter) else p for p in params]


def clip_global_norm(params, max_norm: float = 5.0) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm.  Missing gradients count as zero.
    """
    tensors = _tensors(params)
    total = 0.0
    for t in tensors:
        if t.grad is not None:
            total += float((t.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for t in tensors:
            if t.grad is not None:
                t.grad *= np.array(factor, dtype=t.grad.dtype)
    return norm


class Adam:
    """Adam update: p <- p - lr * m_hat / (sqrt(v_hat) + eps).

    eps sits outside the square root, so a first step on any nonzero
    gradient moves each coordinate by almost exactly lr.
    """

    def __init__(self, params, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = _tensors(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            m_hat = m / bias1
            v_hat = v / bias2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
