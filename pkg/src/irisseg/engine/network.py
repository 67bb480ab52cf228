"""A trainable network instantiated from a :class:`NetworkSpec`.

Each layer runs, in order: concatenate its source activations along
channels, optionally unpool (restoring positions recorded by the most
recent pooling stage, last in first out), convolve and add the bias,
optionally batch-normalise, apply the activation, optionally max-pool.
The forward pass records a tape from which :meth:`Network.backward`
produces gradients for every parameter in :meth:`Network.params` order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch, ValidationError
from ..netspec import INPUT_ID, LayerSpec, NetworkSpec
from ..rng import Rng, derive_seed
from .fftconv import conv2d_backward, conv2d_forward
from .layers import (
    BatchNorm2d,
    concat_channels,
    maxpool2,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    split_channels,
    unpool2,
    unpool2_backward,
)

__all__ = ["Network", "build_network", "predict", "binarize"]


class _Layer:
    """Parameter bundle for one spec layer."""

    __slots__ = ("spec", "weight", "bias", "bn")

    def __init__(self, spec: LayerSpec, weight: np.ndarray, bias: np.ndarray,
                 bn: BatchNorm2d | None) -> None:
        self.spec = spec
        self.weight = weight
        self.bias = bias
        self.bn = bn


def _glorot(rng: Rng, co: int, ci: int, k: int, dtype) -> np.ndarray:
    """Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)); fans count
    the full receptive field, channels times kernel area."""
    fan_in = ci * k * k
    fan_out = co * k * k
    s = np.sqrt(6.0 / (fan_in + fan_out))
    flat = rng.uniform_array(co * ci * k * k, -s, s)
    return flat.reshape(co, ci, k, k).astype(dtype)


class Network:
    def __init__(self, spec: NetworkSpec, seed: int, dtype=np.float32) -> None:
        spec.validate()
        self.spec = spec
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.layers: list[_Layer] = []
        for index, ls in enumerate(spec.layers):
            ci = int(ls.in_channels)
            co = int(ls.out_channels)
            rng = Rng(derive_seed(seed, index))
            weight = _glorot(rng, co, ci, ls.kernel, self.dtype)
            bias = np.zeros(co, dtype=self.dtype)
            bn = BatchNorm2d(co, dtype=self.dtype) if ls.batch_norm else None
            self.layers.append(_Layer(ls, weight, bias, bn))

    def params(self) -> list[np.ndarray]:
        """All trainable arrays, layer by layer: weight, bias, then the
        batch-norm scale and shift when present."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
            if layer.bn is not None:
                out.append(layer.bn.gamma)
                out.append(layer.bn.beta)
        return out

    def count_weights(self, include_bias: bool = False) -> int:
        total = sum(layer.weight.size for layer in self.layers)
        if include_bias:
            total += sum(layer.bias.size for layer in self.layers)
        return total

    def forward(self, x: np.ndarray, training: bool = False):
        """Run the network on (batch, channels, height, width) input.

        Returns the output map, or ``(output, tape)`` when training.
        """
        if x.ndim != 4:
            raise ShapeMismatch(f"expected 4D input, got shape {x.shape}")
        first_in = int(self.spec.layers[0].in_channels)
        if x.shape[1] != first_in:
            raise ShapeMismatch(
                f"network expects {first_in} input channels, got {x.shape[1]}"
            )
        x = x.astype(self.dtype, copy=False)
        acts: dict[str, np.ndarray] = {INPUT_ID: x}
        pool_stack: list[np.ndarray] = []
        tape: list[dict] = []
        out = x
        for layer in self.layers:
            ls = layer.spec
            parts = [acts[src] for src in ls.input_sources]
            xin = concat_channels(parts)
            unpool_idx = None
            if ls.unpool_before:
                if not pool_stack:
                    raise ValidationError(f"layer {ls.id}: no pooling stage to undo")
                unpool_idx = pool_stack.pop()
                xin = unpool2(xin, unpool_idx)
            z = conv2d_forward(xin, layer.weight)
            z += layer.bias.reshape(1, -1, 1, 1)
            bn_cache = None
            if layer.bn is not None:
                z, bn_cache = layer.bn.forward(z, training)
            if ls.activation == "relu":
                y = relu(z)
            elif ls.activation == "sigmoid":
                y = sigmoid(z)
            else:
                y = z
            # Consumers see the pooled tensor; the activation backward
            # needs the pre-pool one, so keep both when taping.
            y_act = y
            pool_idx = None
            if ls.pool_after:
                y, pool_idx = maxpool2(y)
                pool_stack.append(pool_idx)
            acts[ls.id] = y
            out = y
            if training:
                tape.append(
                    {
                        "layer": layer,
                        "split": [p.shape[1] for p in parts],
                        "unpool_idx": unpool_idx,
                        "xin": xin,
                        "y": y_act,
                        "bn_cache": bn_cache,
                        "pool_idx": pool_idx,
                    }
                )
        if training:
            return out, tape
        return out

    def backward(self, tape: list[dict], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients for :meth:`params`, given the loss gradient at the
        network output.  Consumes the tape from :meth:`forward`."""
        grad_acc: dict[str, np.ndarray] = {self.layers[-1].spec.id: grad_out}
        grads: dict[str, tuple] = {}
        for entry in reversed(tape):
            layer = entry["layer"]
            ls = layer.spec
            g = grad_acc.pop(ls.id, None)
            if entry["pool_idx"] is not None and g is not None:
                # Max pooling routes the gradient to each window's argmax.
                g = unpool2(g, entry["pool_idx"])
            if g is None:
                g = np.zeros_like(entry["y"])
            if ls.activation == "relu":
                g = relu_backward(entry["y"], g)
            elif ls.activation == "sigmoid":
                g = sigmoid_backward(entry["y"], g)
            if layer.bn is not None:
                g, g_gamma, g_beta = layer.bn.backward(entry["bn_cache"], g)
            else:
                g_gamma = g_beta = None
            g_bias = g.sum(axis=(0, 2, 3))
            grad_x, grad_w = conv2d_backward(entry["xin"], layer.weight, g)
            if entry["unpool_idx"] is not None:
                grad_x = unpool2_backward(grad_x, entry["unpool_idx"])
            for src, part in zip(
                ls.input_sources, split_channels(grad_x, entry["split"])
            ):
                if src == INPUT_ID:
                    continue
                if src in grad_acc:
                    grad_acc[src] = grad_acc[src] + part
                else:
                    grad_acc[src] = part
            grads[ls.id] = (grad_w, g_bias, g_gamma, g_beta)
        out: list[np.ndarray] = []
        for layer in self.layers:
            grad_w, g_bias, g_gamma, g_beta = grads[layer.spec.id]
            out.append(grad_w)
            out.append(g_bias)
            if layer.bn is not None:
                out.append(g_gamma)
                out.append(g_beta)
        return out


def build_network(spec: NetworkSpec, seed: int, dtype=np.float32) -> Network:
    """Validate ``spec`` and materialise parameters deterministically:
    layer ``i`` draws from an independent stream seeded with
    ``derive_seed(seed, i)``, so the same seed always yields the same
    network."""
    return Network(spec, seed, dtype=dtype)


def predict(net: Network, image: np.ndarray) -> np.ndarray:
    """Probability map for a single grayscale image (height, width).

    Integer images are taken as 0..255 and scaled; floating images are
    assumed to lie in [0, 1] already.
    """
    if image.ndim != 2:
        raise ShapeMismatch(f"expected a 2D image, got shape {image.shape}")
    if np.issubdtype(image.dtype, np.integer):
        x = image.astype(net.dtype) / 255.0
    else:
        x = image.astype(net.dtype, copy=False)
    out = net.forward(x[None, None])
    return out[0, 0]


def binarize(prob_map: np.ndarray, threshold: float = 0.45) -> np.ndarray:
    """Strictly-greater threshold onto {0, 1} as uint8."""
    return (prob_map > threshold).astype(np.uint8)
