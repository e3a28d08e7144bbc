"""AdamW with decoupled weight decay, and EMA parameter tracking."""

from __future__ import annotations

import numpy as np


class AdamW:
    """Adam with bias correction and decoupled weight decay.

    Update per array:
        m <- b1 m + (1 - b1) g
        v <- b2 v + (1 - b2) g^2
        p <- p - lr * ( m_hat / (sqrt(v_hat) + eps) + weight_decay * p )
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        """One in-place update of ``params`` from ``grads`` (same structure)."""
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ValueError("parameter/gradient structure does not match optimizer state")
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)


def adamw_step(opt: AdamW, params, grads):
    """Functional wrapper around :meth:`AdamW.step`; returns the params."""
    opt.step(params, grads)
    return params


class EmaTracker:
    """Exponential moving average of parameter arrays.

    shadow <- decay * shadow + (1 - decay) * params
    """

    def __init__(self, params, decay=0.9):
        if not 0.0 <= decay <= 1.0:
            raise ValueError("decay must lie in [0, 1]")
        self.decay = float(decay)
        self.shadow = [np.array(p, dtype=float, copy=True) for p in params]

    def update(self, params) -> None:
        if len(params) != len(self.shadow):
            raise ValueError("parameter structure does not match EMA state")
        for s, p in zip(self.shadow, params):
            if s.shape != p.shape:
                raise ValueError(f"parameter shape {p.shape} does not match EMA {s.shape}")
            s *= self.decay
            s += (1.0 - self.decay) * p


def ema_update(ema: EmaTracker, params):
    """Functional wrapper around :meth:`EmaTracker.update`; returns the shadow."""
    ema.update(params)
    return ema.shadow
