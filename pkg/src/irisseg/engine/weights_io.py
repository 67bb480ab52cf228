"""Binary serialisation of network parameters.

Layout (little-endian throughout): the magic ``SPDN``, a u32 format
version (currently 1), a u32 layer count, then per layer a u32 kernel
size, u32 input channels, u32 output channels, a u8 bias flag, the
weights as float32 in (out, in, ky, kx) row-major order, and the float32
biases when the flag is set.  Batch-norm state is not part of the file;
the format covers convolution parameters only.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ParseError, ShapeMismatch
from .network import Network

__all__ = ["save_weights", "load_weights", "MAGIC", "VERSION"]

MAGIC = b"SPDN"
VERSION = 1


def save_weights(path, net: Network) -> None:
    """Write the convolution weights and biases of ``net`` to ``path``.

    Parameters kept in a wider precision are cast to float32.
    """
    chunks = [MAGIC, struct.pack("<II", VERSION, len(net.layers))]
    for layer in net.layers:
        co, ci, k, _ = layer.weight.shape
        chunks.append(struct.pack("<IIIB", k, ci, co, 1))
        chunks.append(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def _take(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    end = offset + size
    if end > len(buf):
        raise ParseError(f"weights file truncated while reading {what}")
    return buf[offset:end], end


def load_weights(path, net: Network) -> Network:
    """Load parameters from ``path`` into ``net`` (shapes must match).

    Values are cast to the network dtype.  Returns ``net``.
    """
    buf = Path(path).read_bytes()
    head, offset = _take(buf, 0, 12, "header")
    if head[:4] != MAGIC:
        raise ParseError(f"bad magic {head[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack("<II", head[4:])
    if version != VERSION:
        raise ParseError(f"unsupported weights version {version}")
    if count != len(net.layers):
        raise ShapeMismatch(
            f"file holds {count} layers, network has {len(net.layers)}"
        )
    for layer in net.layers:
        raw, offset = _take(buf, offset, 13, "layer header")
        k, ci, co, has_bias = struct.unpack("<IIIB", raw)
        if (co, ci, k, k) != layer.weight.shape:
            raise ShapeMismatch(
                f"layer {layer.spec.id}: file shape {(co, ci, k, k)} vs "
                f"network {layer.weight.shape}"
            )
        raw, offset = _take(buf, offset, 4 * co * ci * k * k, "weights")
        w = np.frombuffer(raw, dtype="<f4").reshape(co, ci, k, k)
        layer.weight[...] = w.astype(net.dtype)
        if has_bias:
            raw, offset = _take(buf, offset, 4 * co, "biases")
            layer.bias[...] = np.frombuffer(raw, dtype="<f4").astype(net.dtype)
        else:
            layer.bias[...] = 0
    if offset != len(buf):
        raise ParseError(f"{len(buf) - offset} trailing bytes in weights file")
    return net
