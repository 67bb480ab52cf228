"""Four-stage image degradation: downscale, contrast remap, shadow, blur.

Stages run on float64 intensity arrays in [0, 255]; the pipeline rounds
and clips back to uint8 only at the very end.  The mask is resized with
the image and re-binarized, but is never contrast-mapped, shadowed, or
blurred: ground truth stays crisp.

All randomness flows through one PRNG stream per image; the draw order
of :func:`draw_params` is part of the output format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NonBinaryInput, ShapeMismatch, UpscaleRequest
from .rng import Rng, derive_seed

__all__ = [
    "TARGET_SIZE",
    "AugmentParams",
    "draw_params",
    "resize_bilinear",
    "resize_mask",
    "tanh_curve",
    "contrast_outside",
    "contrast_inside",
    "shadow",
    "motion_blur_kernel",
    "convolve_image",
    "augment_pipeline",
    "augment_image",
]

TARGET_SIZE = (128, 96)  # (width, height)


@dataclass(frozen=True)
class AugmentParams:
    outside_offset: float  # U(-0.3, 0.3)
    inside_offset: float  # U(0, 0.8)
    shadow_offset: float  # U(-0.3, 0.3)
    shadow_lift: float  # U(0, 0.1)
    shadow_sign: int  # {-1, +1}
    blur_length: float  # U(5, 10)
    blur_angle: float  # U(-pi, pi)


def draw_params(rng: Rng) -> AugmentParams:
    """Sample one parameter set.  Field order is fixed: reordering the
    draws would change every augmented dataset."""
    return AugmentParams(
        outside_offset=rng.uniform(-0.3, 0.3),
        inside_offset=rng.uniform(0.0, 0.8),
        shadow_offset=rng.uniform(-0.3, 0.3),
        shadow_lift=rng.uniform(0.0, 0.1),
        shadow_sign=rng.sign(),
        blur_length=rng.uniform(5.0, 10.0),
        blur_angle=rng.uniform(-math.pi, math.pi),
    )


def resize_bilinear(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Downscale to ``size`` (width, height) with half-pixel-centre
    bilinear sampling, edge-clamped.  Upscaling is refused."""
    src = np.asarray(arr, dtype=np.float64)
    if src.ndim != 2:
        raise ShapeMismatch(f"expected a 2D image, got shape {src.shape}")
    h, w = src.shape
    tw, th = size
    if tw > w or th > h:
        raise UpscaleRequest(f"cannot resize {w}x{h} up to {tw}x{th}")
    sy = (np.arange(th) + 0.5) * (h / th) - 0.5
    sx = (np.arange(tw) + 0.5) * (w / tw) - 0.5
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    y0 = np.clip(y0, 0, h - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x0 = np.clip(x0, 0, w - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    top = (1 - fx) * src[y0[:, None], x0] + fx * src[y0[:, None], x1]
    bot = (1 - fx) * src[y1[:, None], x0] + fx * src[y1[:, None], x1]
    return (1 - fy) * top + fy * bot


def resize_mask(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Resample a {0, 1} mask like the image, then re-binarize at 0.5."""
    m = np.asarray(mask)
    if not np.isin(m, (0, 1)).all():
        raise NonBinaryInput("mask contains values other than 0 and 1")
    return (resize_bilinear(m.astype(np.float64), size) >= 0.5).astype(np.uint8)


def tanh_curve(x, gain: float, offset: float):
    """Monotone intensity remap y = norm(tanh(gain*(x/255 - 0.5) + offset)).

    ``norm`` rescales by the curve's achievable range on [0, 255], so
    y(0) = 0 and y(255) = 255 exactly for every offset.
    """
    x = np.asarray(x, dtype=np.float64)
    lo = math.tanh(-0.5 * gain + offset)
    hi = math.tanh(0.5 * gain + offset)
    return (np.tanh(gain * (x / 255.0 - 0.5) + offset) - lo) / (hi - lo) * 255.0


def contrast_outside(img: np.ndarray, mask: np.ndarray, offset: float) -> np.ndarray:
    """Remap non-iris pixels through the gain-3 curve at ``+offset``."""
    out = np.asarray(img, dtype=np.float64).copy()
    sel = np.asarray(mask) == 0
    out[sel] = tanh_curve(out[sel], 3.0, offset)
    return out


def contrast_inside(img: np.ndarray, mask: np.ndarray, offset: float) -> np.ndarray:
    """Remap iris pixels through the gain-3 curve at ``-offset``; positive
    offsets darken the region."""
    out = np.asarray(img, dtype=np.float64).copy()
    sel = np.asarray(mask) == 1
    out[sel] = tanh_curve(out[sel], 3.0, -offset)
    return out


def shadow(img: np.ndarray, offset: float, lift: float, sign: int) -> np.ndarray:
    """Multiply each column by norm(tanh(2*sign*(x - 0.5 + offset))) + lift
    with x the column position in [0, 1]; clip the products to [0, 255]."""
    arr = np.asarray(img, dtype=np.float64)
    w = arr.shape[1]
    if w < 2:
        raise ShapeMismatch("shadow needs at least two columns")
    x = np.arange(w) / (w - 1)
    t = np.tanh(2.0 * sign * (x - 0.5 + offset))
    # min-max over the column domain; tanh is monotone so the extremes
    # sit at the first and last column
    lo, hi = (t[0], t[-1]) if sign > 0 else (t[-1], t[0])
    coef = (t - lo) / (hi - lo) + lift
    return np.clip(arr * coef[None, :], 0.0, 255.0)


def motion_blur_kernel(length: float, angle: float) -> np.ndarray:
    """Line-segment kernel: ``length`` pixels through the centre in the
    direction ``angle``, rasterized by bilinear splatting of 16 midpoint
    samples per unit length, normalized to sum 1.  The side is
    ceil(length)+1, forced odd so the centre is a cell."""
    side = math.ceil(length) + 1
    if side % 2 == 0:
        side += 1
    c = side // 2
    n = max(1, round(16 * length))
    s = ((np.arange(n) + 0.5) / n - 0.5) * length
    px = c + math.cos(angle) * s
    py = c + math.sin(angle) * s
    x0 = np.floor(px).astype(np.intp)
    y0 = np.floor(py).astype(np.intp)
    fx = px - x0
    fy = py - y0
    kernel = np.zeros((side, side))
    np.add.at(kernel, (y0, x0), (1 - fy) * (1 - fx))
    np.add.at(kernel, (y0, x0 + 1), (1 - fy) * fx)
    np.add.at(kernel, (y0 + 1, x0), fy * (1 - fx))
    np.add.at(kernel, (y0 + 1, x0 + 1), fy * fx)
    return kernel / kernel.sum()


def convolve_image(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Edge-replicated true convolution (a constant image is a fixed
    point of any sum-1 kernel)."""
    return ndimage.convolve(
        np.asarray(img, dtype=np.float64), kernel, mode="nearest"
    )


def augment_pipeline(
    image: np.ndarray,
    mask: np.ndarray,
    rng: Rng,
    size: tuple[int, int] = TARGET_SIZE,
) -> tuple[np.ndarray, np.ndarray]:
    """Degrade one labeled image; returns (uint8 image, {0, 1} mask)."""
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape != mask.shape:
        raise ShapeMismatch(f"image {image.shape} vs mask {mask.shape}")
    params = draw_params(rng)
    img = resize_bilinear(image, size)
    m = resize_mask(mask, size)
    img = contrast_outside(img, m, params.outside_offset)
    img = contrast_inside(img, m, params.inside_offset)
    img = shadow(img, params.shadow_offset, params.shadow_lift, params.shadow_sign)
    img = convolve_image(img, motion_blur_kernel(params.blur_length, params.blur_angle))
    out = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return out, m


def augment_image(
    image: np.ndarray,
    mask: np.ndarray,
    seed: int,
    index: int,
    size: tuple[int, int] = TARGET_SIZE,
) -> tuple[np.ndarray, np.ndarray]:
    """Pipeline with the per-image stream derived from (seed, index)."""
    return augment_pipeline(image, mask, Rng(derive_seed(seed, index)), size)
