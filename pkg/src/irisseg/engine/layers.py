"""Non-convolutional building blocks: activations, pooling, batch norm.

Everything operates on (batch, channels, height, width) arrays and
keeps the input dtype.  Pooling halves both spatial dimensions with a
2x2 window and remembers which corner won, so the matching unpooling
stage can place values back where they came from.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import OddSpatialDim, ShapeMismatch

__all__ = [
    "relu",
    "relu_backward",
    "sigmoid",
    "sigmoid_backward",
    "concat_channels",
    "split_channels",
    "maxpool2",
    "unpool2",
    "unpool2_backward",
    "BatchNorm2d",
]


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0)


def relu_backward(z: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    return np.where(z > 0, grad_y, 0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # expit is overflow-safe for large |z|.
    return expit(z)


def sigmoid_backward(y: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    """Gradient through the sigmoid given its output ``y``."""
    return grad_y * y * (1 - y)


def concat_channels(parts: list[np.ndarray]) -> np.ndarray:
    if not parts:
        raise ValueError("nothing to concatenate")
    return np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]


def split_channels(x: np.ndarray, sizes: list[int]) -> list[np.ndarray]:
    """Inverse of :func:`concat_channels` for gradient routing."""
    if sum(sizes) != x.shape[1]:
        raise ShapeMismatch(f"cannot split {x.shape[1]} channels into {sizes}")
    out = []
    start = 0
    for s in sizes:
        out.append(x[:, start : start + s])
        start += s
    return out


def _windows(x: np.ndarray) -> np.ndarray:
    """View (b, c, h, w) as (b, c, h/2, w/2, 4) window stacks."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise OddSpatialDim(f"2x2 pooling needs even spatial dims, got {h}x{w}")
    return x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        b, c, h // 2, w // 2, 4
    )


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max pool; returns (pooled, argmax) with argmax in 0..3.

    Ties go to the lowest window index, so the result is deterministic.
    """
    win = _windows(x)
    idx = np.argmax(win, axis=-1)
    pooled = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return pooled, idx.astype(np.int8)


def unpool2(values: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Scatter ``values`` (b, c, h, w) into zeros of shape (b, c, 2h, 2w)
    at the window positions recorded by :func:`maxpool2`."""
    if values.shape != idx.shape:
        raise ShapeMismatch(
            f"values {values.shape} do not match pooling indices {idx.shape}"
        )
    b, c, h, w = values.shape
    win = np.zeros((b, c, h, w, 4), dtype=values.dtype)
    np.put_along_axis(win, idx[..., None].astype(np.intp), values[..., None], axis=-1)
    return win.reshape(b, c, h, w, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        b, c, 2 * h, 2 * w
    )


def unpool2_backward(grad_y: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Gather the gradient back out of the scattered positions.

    Also serves as the max-pool backward pass: routing the pooled
    gradient to each window's argmax is the same gather.
    """
    win = _windows(grad_y)
    return np.take_along_axis(win, idx[..., None].astype(np.intp), axis=-1)[..., 0]


class BatchNorm2d:
    """Per-channel batch normalisation with learnable scale and shift.

    Training mode normalises by batch statistics (population variance
    over batch and both spatial axes) and updates running estimates as
    ``running = momentum * running + (1 - momentum) * batch``.  Eval
    mode applies the running estimates.
    """

    def __init__(
        self, channels: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32
    ) -> None:
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x: np.ndarray, training: bool):
        """Returns (output, cache); cache is None in eval mode."""
        if x.shape[1] != self.channels:
            raise ShapeMismatch(f"expected {self.channels} channels, got {x.shape[1]}")
        shape = (1, self.channels, 1, 1)
        if not training:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            scale = (self.gamma * inv).reshape(shape)
            shift = (self.beta - self.gamma * self.running_mean * inv).reshape(shape)
            return (x * scale + shift).astype(x.dtype, copy=False), None
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        m = self.momentum
        self.running_mean = (m * self.running_mean + (1 - m) * mean).astype(
            self.running_mean.dtype
        )
        self.running_var = (m * self.running_var + (1 - m) * var).astype(
            self.running_var.dtype
        )
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        y = self.gamma.reshape(shape) * xhat + self.beta.reshape(shape)
        return y.astype(x.dtype, copy=False), (xhat, inv_std)

    def backward(self, cache, grad_y: np.ndarray):
        """Returns (grad_x, grad_gamma, grad_beta) for a training pass."""
        xhat, inv_std = cache
        shape = (1, self.channels, 1, 1)
        n = grad_y.shape[0] * grad_y.shape[2] * grad_y.shape[3]
        grad_beta = grad_y.sum(axis=(0, 2, 3))
        grad_gamma = (grad_y * xhat).sum(axis=(0, 2, 3))
        dxhat = grad_y * self.gamma.reshape(shape)
        # Batch statistics depend on every element, hence the two
        # correction terms against the plain scaled gradient.
        grad_x = (
            inv_std.reshape(shape)
            / n
            * (
                n * dxhat
                - dxhat.sum(axis=(0, 2, 3)).reshape(shape)
                - xhat * (dxhat * xhat).sum(axis=(0, 2, 3)).reshape(shape)
            )
        )
        return grad_x.astype(grad_y.dtype, copy=False), grad_gamma, grad_beta
