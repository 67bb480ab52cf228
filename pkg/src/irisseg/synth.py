"""Synthetic eye-like scenes with exact segmentation masks.

Each image is drawn from a per-index PRNG stream, so sample ``i`` of a
run depends only on (seed, i).  The scene is a bright sclera, an iris
annulus carrying an angular sinusoid texture plus low-frequency value
noise, a dark pupil, an upper eyelid bounded by a parabola, and a small
specular highlight.  The mask is the rendered iris region itself:
annulus minus pupil minus eyelid, taken from the same geometry the
renderer uses, so labels carry no noise.

The eyelid's lowest point stays above the pupil (margin 0.55 of the
iris radius against a pupil of at most 0.45), which keeps the pupil
hole intact and the visible iris connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .rng import Rng, derive_seed

__all__ = ["SceneParams", "LabeledImage", "scene_params", "render", "generate"]


@dataclass(frozen=True)
class SceneParams:
    width: int
    height: int
    cx: float
    cy: float
    iris_r: float
    pupil_ratio: float
    iris_base: float
    texture_amp: float
    texture_waves: int
    texture_phase: float
    noise_amp: float
    sclera: float
    pupil_int: float
    lid_int: float
    lid_y0: float
    lid_curv: float
    hl_angle: float
    hl_dist: float
    hl_r: float
    hl_int: float
    pixel_noise: float


@dataclass(frozen=True)
class LabeledImage:
    image: np.ndarray  # uint8 (height, width)
    mask: np.ndarray  # uint8 (height, width), 1 = iris
    params: SceneParams


def scene_params(rng: Rng, width: int, height: int) -> SceneParams:
    """Draw one scene.  The draw order is fixed; changing it would
    silently change every generated dataset."""
    cx = rng.uniform(0.35, 0.65) * width
    cy = rng.uniform(0.40, 0.65) * height
    iris_r = rng.uniform(0.18, 0.30) * min(width, height)
    pupil_ratio = rng.uniform(0.25, 0.45)
    iris_base = rng.uniform(70.0, 120.0)
    texture_amp = rng.uniform(10.0, 30.0)
    texture_waves = 8 + rng.below(13)
    texture_phase = rng.uniform(0.0, 2 * math.pi)
    noise_amp = rng.uniform(5.0, 15.0)
    sclera = rng.uniform(170.0, 220.0)
    pupil_int = rng.uniform(10.0, 40.0)
    lid_int = rng.uniform(120.0, 170.0)
    lid_y0 = cy - iris_r * rng.uniform(0.55, 1.30)
    lid_curv = rng.uniform(0.002, 0.010)
    hl_angle = rng.uniform(0.0, 2 * math.pi)
    hl_dist = rng.uniform(0.2, 0.6)
    hl_r = rng.uniform(0.05, 0.12)
    hl_int = rng.uniform(230.0, 250.0)
    pixel_noise = rng.uniform(2.0, 5.0)
    return SceneParams(
        width=width,
        height=height,
        cx=cx,
        cy=cy,
        iris_r=iris_r,
        pupil_ratio=pupil_ratio,
        iris_base=iris_base,
        texture_amp=texture_amp,
        texture_waves=texture_waves,
        texture_phase=texture_phase,
        noise_amp=noise_amp,
        sclera=sclera,
        pupil_int=pupil_int,
        lid_int=lid_int,
        lid_y0=lid_y0,
        lid_curv=lid_curv,
        hl_angle=hl_angle,
        hl_dist=hl_dist,
        hl_r=hl_r,
        hl_int=hl_int,
        pixel_noise=pixel_noise,
    )


def _value_noise(rng: Rng, height: int, width: int) -> np.ndarray:
    """Low-frequency noise in [-1, 1]: a coarse uniform grid upsampled
    bilinearly to the canvas."""
    gh = height // 8 + 2
    gw = width // 8 + 2
    grid = rng.uniform_array(gh * gw, -1.0, 1.0).reshape(gh, gw)
    up = ndimage.zoom(grid, (height / gh, width / gw), order=1, grid_mode=True,
                      mode="nearest")
    return up[:height, :width]


def render(params: SceneParams, rng: Rng) -> LabeledImage:
    """Rasterise a scene.  ``rng`` continues the stream that drew the
    parameters (value noise and pixel noise still come from it)."""
    h, w = params.height, params.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xs - params.cx
    dy = ys - params.cy
    dist = np.hypot(dx, dy)

    iris_disk = dist <= params.iris_r
    pupil_r = params.pupil_ratio * params.iris_r
    pupil_disk = dist <= pupil_r
    lid = ys <= params.lid_y0 - params.lid_curv * dx * dx
    annulus = iris_disk & ~pupil_disk & ~lid

    theta = np.arctan2(dy, dx)
    texture = params.iris_base + params.texture_amp * np.sin(
        params.texture_waves * theta + params.texture_phase
    )
    noise = params.noise_amp * _value_noise(rng, h, w)

    img = np.full((h, w), params.sclera, dtype=np.float64)
    img[lid] = params.lid_int
    img[annulus] = texture[annulus] + noise[annulus]
    img[pupil_disk & ~lid] = params.pupil_int

    hl_cx = params.cx + math.cos(params.hl_angle) * (
        pupil_r + params.hl_dist * (params.iris_r - pupil_r)
    )
    hl_cy = params.cy + math.sin(params.hl_angle) * (
        pupil_r + params.hl_dist * (params.iris_r - pupil_r)
    )
    highlight = (
        np.hypot(xs - hl_cx, ys - hl_cy) <= params.hl_r * params.iris_r
    ) & annulus
    img[highlight] = params.hl_int

    img += rng.uniform_array(h * w, -params.pixel_noise, params.pixel_noise).reshape(
        h, w
    )
    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return LabeledImage(image=image, mask=annulus.astype(np.uint8), params=params)


def generate_one(seed: int, index: int, size: tuple[int, int] = (64, 48)) -> LabeledImage:
    """Sample ``index`` of the stream: independent of every other index."""
    width, height = size
    rng = Rng(derive_seed(seed, index))
    return render(scene_params(rng, width, height), rng)


def generate(seed: int, count: int, size: tuple[int, int] = (64, 48)) -> list[LabeledImage]:
    """``count`` labeled images of ``size`` (width, height)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [generate_one(seed, index, size) for index in range(count)]
