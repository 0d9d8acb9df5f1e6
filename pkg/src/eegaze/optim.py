"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class AdamState:
    """First/second moment estimates and step count for one parameter set."""

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


class Adam:
    """Standard Adam over a list of parameter tensors.

    Update: m, v exponential moving averages of grad and grad^2, bias
    corrected by 1 - beta^t; step = lr * m_hat / (sqrt(v_hat) + eps).
    A zero gradient leaves its parameter untouched.
    """

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ValueError("Adam: lr must be nonnegative")
        self.params: list[Tensor] = list(params)
        self.lr = lr
        self.state = AdamState(self.params, beta1, beta2, eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        s = self.state
        s.t += 1
        bc1 = 1.0 - s.beta1**s.t
        bc2 = 1.0 - s.beta2**s.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ValueError(f"Adam: gradient shape {g.shape} != parameter shape {p.data.shape}")
            m, v = s.m[i], s.v[i]
            m *= s.beta1
            m += g * (1.0 - s.beta1)
            v *= s.beta2
            gg = g * g
            gg *= 1.0 - s.beta2
            v += gg
            denom = np.sqrt(v / bc2)
            denom += s.eps
            upd = m / denom
            upd *= self.lr / bc1
            p.data -= upd.astype(p.data.dtype, copy=False)


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm
