"""Binary PGM (P5, maxval 255) reader/writer.

Images are 8-bit grayscale 2-D numpy arrays. Masks use {0, 255} on disk
and {0, 1} in memory; helpers convert between the two.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError


def _read_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First `count` whitespace-separated tokens, skipping # comments.

    Returns the tokens and the offset one byte past the single whitespace
    character that terminates the last token.
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:i])
        if len(tokens) == count:
            if i >= n:
                raise ParseError("missing whitespace after PGM maxval")
            i += 1  # exactly one whitespace byte before the raster
    return tokens, i


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ParseError(f"{path}: not a binary PGM (P5)")
    tokens, offset = _read_header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric PGM header field") from exc
    if maxval != 255:
        raise ParseError(f"{path}: unsupported maxval {maxval} (need 255)")
    if width <= 0 or height <= 0:
        raise ParseError(f"{path}: bad dimensions {width}x{height}")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise ParseError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, img: np.ndarray) -> None:
    if img.ndim != 2:
        raise ParseError(f"image must be 2-D, got shape {img.shape}")
    arr = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_mask(path) -> np.ndarray:
    """PGM with values {0, 255} -> binary {0, 1} uint8 array."""
    arr = read_pgm(path)
    bad = np.setdiff1d(np.unique(arr), [0, 255])
    if bad.size:
        raise ParseError(f"{path}: mask values outside {{0,255}}: {bad.tolist()}")
    return (arr > 0).astype(np.uint8)


def write_mask(path, mask: np.ndarray) -> None:
    write_pgm(path, np.asarray(mask, dtype=np.uint8) * 255)
