"""Binary cross entropy over probability maps."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch

__all__ = ["bce_loss", "CLAMP_EPS"]

# Predictions are clamped into [eps, 1 - eps] before the logs so a
# saturated sigmoid cannot produce infinities.
CLAMP_EPS = 1e-7


def bce_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross entropy and its gradient w.r.t. ``pred``.

    ``pred`` holds probabilities in [0, 1], ``target`` the matching
    {0, 1} labels.  The mean runs over every element, so the gradient
    carries a ``1 / pred.size`` factor.
    """
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    p = np.clip(pred, CLAMP_EPS, 1.0 - CLAMP_EPS)
    t = target.astype(p.dtype, copy=False)
    loss = -float(np.mean(t * np.log(p) + (1 - t) * np.log1p(-p)))
    grad = -(t / p - (1 - t) / (1 - p)) / p.size
    return loss, grad.astype(pred.dtype, copy=False)
