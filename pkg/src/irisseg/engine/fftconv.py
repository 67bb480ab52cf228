"""Same-padded 2D convolution layers computed through real FFTs.

The layer operation is the cross-correlation used by convolutional
networks: an odd ``k x k`` window centred on each output pixel, with
zero padding of ``(k - 1) // 2`` so spatial dimensions are preserved.
Both images and kernels are zero-extended to a padded size of at least
``H + k - 1`` so the circular product equals the linear one, and the
padded size is rounded up to the next 5-smooth integer where the FFT
is cheap.  Forward and both backward products reuse one spectral
contraction helper; gradients recompute the input and kernel spectra
instead of caching them, trading a modest amount of work for memory.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

__all__ = ["fast_len", "conv2d_forward", "conv2d_backward"]


def fast_len(n: int) -> int:
    """Smallest 5-smooth integer (factors 2, 3, 5 only) at least ``n``."""
    if n < 1:
        raise ValueError("length must be positive")
    best = 1
    while best < n:
        best *= 2
    p5 = 1
    while p5 < best:
        p35 = p5
        while p35 < best:
            cand = p35
            while cand < n:
                cand *= 2
            if cand < best:
                best = cand
            p35 *= 3
        p5 *= 5
    return best


class _Plan:
    """Padded sizes and gather indices for one (height, width, kernel)."""

    __slots__ = ("pad", "ph", "pw", "rows_fwd", "cols_fwd", "rows_gx", "cols_gx")

    def __init__(self, h: int, w: int, k: int) -> None:
        self.pad = (k - 1) // 2
        self.ph = fast_len(h + k - 1)
        self.pw = fast_len(w + k - 1)
        # Forward output lives at offset -pad in the circular result,
        # the input gradient at +pad; both stay alias-free because the
        # padded size covers the full linear support.
        self.rows_fwd = (np.arange(h) - self.pad) % self.ph
        self.cols_fwd = (np.arange(w) - self.pad) % self.pw
        self.rows_gx = (np.arange(h) + self.pad) % self.ph
        self.cols_gx = (np.arange(w) + self.pad) % self.pw


_plans: dict[tuple[int, int, int], _Plan] = {}


def _plan(h: int, w: int, k: int) -> _Plan:
    key = (h, w, k)
    plan = _plans.get(key)
    if plan is None:
        plan = _plans[key] = _Plan(h, w, k)
    return plan


def _contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-frequency matrix product of two spectra.

    ``a`` has shape (n1, c, ph, f) and ``b`` (c, n2, ph, f); the result
    (n1, n2, ph, f) contracts the shared axis ``c`` independently at
    every frequency bin.  Reshaping to a stack of small matrices lets
    BLAS do the sum instead of a huge elementwise temporary.
    """
    n1, c, ph, f = a.shape
    n2 = b.shape[1]
    am = a.transpose(2, 3, 0, 1).reshape(ph * f, n1, c)
    bm = b.transpose(2, 3, 0, 1).reshape(ph * f, c, n2)
    out = np.matmul(am, bm)
    return out.reshape(ph, f, n1, n2).transpose(2, 3, 0, 1)


def conv2d_forward(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Correlate ``x`` (b, ci, h, w) with kernels ``w`` (co, ci, k, k).

    Returns (b, co, h, w) in the dtype of the inputs.  Zero padding of
    half the kernel keeps the spatial size; no bias or activation here.
    """
    b, ci, h, wid = x.shape
    co, ci_w, k, _ = w.shape
    if ci != ci_w:
        raise ValueError(f"input has {ci} channels, kernel expects {ci_w}")
    plan = _plan(h, wid, k)
    shape = (plan.ph, plan.pw)
    xf = sfft.rfft2(x, s=shape)
    wf = sfft.rfft2(w, s=shape)
    # Correlation, not convolution: conjugate the kernel spectrum.
    yf = _contract(xf, np.conj(wf).transpose(1, 0, 2, 3))
    full = sfft.irfft2(yf, s=shape)
    return full[:, :, plan.rows_fwd[:, None], plan.cols_fwd[None, :]]


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, grad_y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``conv2d_forward`` with respect to ``x`` and ``w``.

    ``grad_y`` has the output shape (b, co, h, w).  Spectra of ``x``
    and ``w`` are recomputed rather than kept from the forward pass.
    """
    b, ci, h, wid = x.shape
    co, _, k, _ = w.shape
    plan = _plan(h, wid, k)
    shape = (plan.ph, plan.pw)
    gf = sfft.rfft2(grad_y, s=shape)
    wf = sfft.rfft2(w, s=shape)
    # d/dx flips the correlation back into a convolution: plain product.
    gxf = _contract(gf, wf)
    full_x = sfft.irfft2(gxf, s=shape)
    grad_x = full_x[:, :, plan.rows_gx[:, None], plan.cols_gx[None, :]]

    xf = sfft.rfft2(x, s=shape)
    # d/dw correlates the upstream gradient against the input over the
    # batch, so here the gradient spectrum carries the conjugate.
    gwf = _contract(np.conj(gf).transpose(1, 0, 2, 3), xf)
    full_w = sfft.irfft2(gwf, s=shape)
    rows = (np.arange(k) - plan.pad) % plan.ph
    cols = (np.arange(k) - plan.pad) % plan.pw
    grad_w = full_w[:, :, rows[:, None], cols[None, :]]
    return grad_x, grad_w
