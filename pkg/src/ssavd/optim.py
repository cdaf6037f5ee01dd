"""AdamW with decoupled weight decay, plus the linear LR schedule."""

from __future__ import annotations

import numpy as np

from .tensor import grad_array


class AdamW:
    """Decoupled weight decay: decay is applied to the parameter itself,
    not folded into the gradient."""

    def __init__(self, params, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr=None):
        if lr is None:
            lr = self.lr
        # validate every gradient before touching any parameter or
        # moment, so a failed step leaves the optimizer state intact
        grads = {}
        for name, p in self.params.items():
            g = grad_array(p)
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
            grads[name] = g
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            p.data = p.data - lr * self.weight_decay * p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def lr_schedule(epoch, epochs, lr_start=5e-4, lr_end=1e-4):
    """Linear decay hitting both endpoints exactly; constant within an epoch."""
    if not 0 <= epoch < epochs:
        raise ValueError(f"epoch {epoch} outside [0, {epochs})")
    if epochs == 1 or epoch == 0:
        return lr_start
    if epoch == epochs - 1:
        return lr_end
    return lr_start + (lr_end - lr_start) * epoch / (epochs - 1)
