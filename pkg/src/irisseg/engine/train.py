"""Minibatch training loop."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyInput, ShapeMismatch
from ..rng import Rng
from .loss import bce_loss
from .network import Network
from .optim import SGDMomentum

__all__ = ["TrainConfig", "train"]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 10
    lr: float = 0.001
    momentum: float = 0.9
    seed: int = 0


def _as_inputs(images: np.ndarray, dtype) -> np.ndarray:
    """(n, h, w) images to (n, 1, h, w) network inputs in [0, 1]."""
    if images.ndim != 3:
        raise ShapeMismatch(f"expected (n, h, w) images, got shape {images.shape}")
    if np.issubdtype(images.dtype, np.integer):
        return images.astype(dtype)[:, None] / dtype.type(255)
    return images.astype(dtype, copy=False)[:, None]


def train(
    net: Network,
    images: np.ndarray,
    masks: np.ndarray,
    cfg: TrainConfig,
    log_path=None,
    progress=None,
) -> list[tuple[int, float]]:
    """Fit ``net`` to (image, mask) pairs; returns the per-epoch log.

    ``images`` is (n, h, w), integer 0..255 or floating already in
    [0, 1]; ``masks`` is (n, h, w) with {0, 1} values.  Each epoch
    shuffles the sample order with one PRNG stream seeded from
    ``cfg.seed`` and walks it in batches of ``cfg.batch_size`` (the
    final batch may be short).  The log holds ``(epoch, mean_loss)``
    with the mean taken per sample over the whole epoch; when
    ``log_path`` is given the same pairs are written there as
    ``epoch,mean_loss`` lines.  ``progress``, when given, is called
    with each pair as it becomes available.
    """
    n = images.shape[0]
    if n == 0:
        raise EmptyInput("no training samples")
    if masks.shape != images.shape:
        raise ShapeMismatch(f"masks {masks.shape} do not match images {images.shape}")
    if cfg.epochs < 1 or cfg.batch_size < 1:
        raise ValueError("epochs and batch_size must be at least 1")
    x_all = _as_inputs(images, net.dtype)
    t_all = masks.astype(net.dtype)[:, None]
    opt = SGDMomentum(net.params(), lr=cfg.lr, momentum=cfg.momentum)
    rng = Rng(cfg.seed)
    log: list[tuple[int, float]] = []
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            pick = perm[start : start + cfg.batch_size]
            out, tape = net.forward(x_all[pick], training=True)
            loss, grad = bce_loss(out, t_all[pick])
            opt.step(net.backward(tape, grad))
            total += loss * len(pick)
        mean_loss = total / n
        log.append((epoch, mean_loss))
        if progress is not None:
            progress(epoch, mean_loss)
    if log_path is not None:
        lines = [f"{epoch},{loss!r}\n" for epoch, loss in log]
        Path(log_path).write_text("".join(lines), encoding="ascii")
    return log
