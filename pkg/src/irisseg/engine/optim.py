"""Stochastic gradient descent with classical momentum."""

from __future__ import annotations

import numpy as np

__all__ = ["SGDMomentum"]


class SGDMomentum:
    """Updates ``delta = momentum * delta - lr * grad; param += delta``.

    Velocities start at zero and live in the dtype of the parameters
    they track, one per parameter array, matched by position.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 0.001, momentum: float = 0.9):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocities = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} params")
        for p, v, g in zip(self.params, self.velocities, grads):
            v *= self.momentum
            v -= self.lr * g.astype(v.dtype, copy=False)
            p += v
