"""Plain SGD and AdamW acting in place on a flat parameter vector."""

from __future__ import annotations

import numpy as np


class SGD:
    def __init__(self, lr: float = 1e-3, weight_decay: float = 0.0):
        self.lr = lr
        self.weight_decay = weight_decay

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self.weight_decay:
            params *= 1.0 - self.lr * self.weight_decay
        params -= self.lr * grad


class AdamW:
    """Adam with decoupled weight decay.

    The decay shrinks the parameters before the Adam update::

        p <- p (1 - lr wd)
        m <- b1 m + (1 - b1) g
        v <- b2 v + (1 - b2) g^2
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)
    """

    def __init__(self, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.01):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m = b1 * self.m + (1 - b1) * grad
        self.v = b2 * self.v + (1 - b2) * grad * grad
        m_hat = self.m / (1 - b1**self.t)
        v_hat = self.v / (1 - b2**self.t)
        if self.weight_decay:
            params *= 1.0 - self.lr * self.weight_decay
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(name: str, lr: float, betas=(0.9, 0.999), weight_decay: float = 0.01):
    if name == "adamw":
        return AdamW(lr=lr, betas=betas, weight_decay=weight_decay)
    if name == "sgd":
        return SGD(lr=lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer {name!r}; expected adamw or sgd")
