"""Activations, pooling, channel plumbing, and batch normalisation."""

import numpy as np
import pytest

from irisseg.engine.layers import (
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
from irisseg.errors import OddSpatialDim, ShapeMismatch

from reference import finite_difference_grad, max_rel_err


def test_relu_values_and_grad():
    z = np.array([-2.0, -0.0, 0.5, 3.0])
    assert np.array_equal(relu(z), [0, 0, 0.5, 3.0])
    g = np.ones(4)
    assert np.array_equal(relu_backward(z, g), [0, 0, 1, 1])


def test_sigmoid_values_and_grad():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    assert abs(sigmoid(np.array([1.0]))[0] - 1 / (1 + np.exp(-1))) < 1e-15
    # saturates without overflow warnings
    y = sigmoid(np.array([-1e4, 1e4]))
    assert y[0] == 0.0 and y[1] == 1.0
    out = sigmoid(np.array([0.3]))
    assert abs(sigmoid_backward(out, np.ones(1))[0] - out[0] * (1 - out[0])) < 1e-15


def test_concat_split_roundtrip():
    rng = np.random.default_rng(0)
    parts = [rng.standard_normal((2, c, 3, 3)) for c in (1, 4, 2)]
    joined = concat_channels(parts)
    assert joined.shape == (2, 7, 3, 3)
    back = split_channels(joined, [1, 4, 2])
    for a, b in zip(parts, back):
        assert np.array_equal(a, b)


def test_concat_single_part_is_identity():
    x = np.ones((1, 2, 2, 2))
    assert concat_channels([x]) is x


def test_split_size_mismatch():
    with pytest.raises(ShapeMismatch):
        split_channels(np.zeros((1, 5, 2, 2)), [2, 2])


def test_maxpool_small_case():
    x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
    pooled, idx = maxpool2(x)
    assert np.array_equal(pooled[0, 0], [[5, 7], [13, 15]])
    # ascending data puts the max in the bottom-right window corner
    assert np.all(idx == 3)


def test_maxpool_matches_reshape_max():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((3, 2, 8, 6))
    pooled, _ = maxpool2(x)
    assert np.array_equal(pooled, x.reshape(3, 2, 4, 2, 3, 2).max(axis=(3, 5)))


def test_maxpool_tie_takes_first_position():
    x = np.full((1, 1, 2, 2), 7.0)
    pooled, idx = maxpool2(x)
    assert pooled[0, 0, 0, 0] == 7.0 and idx[0, 0, 0, 0] == 0


def test_maxpool_rejects_odd_dims():
    with pytest.raises(OddSpatialDim):
        maxpool2(np.zeros((1, 1, 5, 4)))
    with pytest.raises(OddSpatialDim):
        maxpool2(np.zeros((1, 1, 4, 7)))


def test_unpool_restores_argmax_positions():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 3, 6, 8))
    pooled, idx = maxpool2(x)
    up = unpool2(pooled, idx)
    assert up.shape == x.shape
    # one value per window, each sitting exactly where it came from
    assert np.count_nonzero(up) == pooled.size
    assert np.array_equal(np.where(up != 0, up, x), x)


def test_unpool_backward_gathers_scatter():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 2, 4, 4))
    pooled, idx = maxpool2(x)
    g = rng.standard_normal(x.shape)
    gathered = unpool2_backward(g, idx)
    # manual gather: value of g at each recorded window position
    for c in range(2):
        for i in range(2):
            for j in range(2):
                k = int(idx[0, c, i, j])
                val = g[0, c, 2 * i + k // 2, 2 * j + k % 2]
                assert gathered[0, c, i, j] == val


def test_unpool_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        unpool2(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 2), dtype=np.int8))


def test_batchnorm_normalises_batch():
    rng = np.random.default_rng(4)
    bn = BatchNorm2d(3, dtype=np.float64)
    x = 5 + 2 * rng.standard_normal((4, 3, 6, 6))
    y, cache = bn.forward(x, training=True)
    assert cache is not None
    assert np.allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    assert np.allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-4)


def test_batchnorm_running_stats_recurrence():
    bn = BatchNorm2d(1, momentum=0.9, dtype=np.float64)
    x = np.full((1, 1, 2, 2), 10.0)
    bn.forward(x, training=True)
    # running = 0.9 * old + 0.1 * batch, starting from mean 0 var 1
    assert abs(bn.running_mean[0] - 1.0) < 1e-12
    assert abs(bn.running_var[0] - 0.9) < 1e-12
    bn.forward(x, training=True)
    assert abs(bn.running_mean[0] - 1.9) < 1e-12
    assert abs(bn.running_var[0] - 0.81) < 1e-12


def test_batchnorm_eval_uses_running_stats():
    bn = BatchNorm2d(2, dtype=np.float64)
    bn.running_mean = np.array([1.0, -1.0])
    bn.running_var = np.array([4.0, 0.25])
    bn.gamma = np.array([2.0, 1.0])
    bn.beta = np.array([0.5, 0.0])
    x = np.ones((1, 2, 1, 1))
    y, cache = bn.forward(x, training=False)
    assert cache is None
    assert abs(y[0, 0, 0, 0] - (2.0 * (1 - 1) / np.sqrt(4 + 1e-5) + 0.5)) < 1e-10
    assert abs(y[0, 1, 0, 0] - (1 + 1) / np.sqrt(0.25 + 1e-5)) < 1e-10


def test_batchnorm_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    bn = BatchNorm2d(3, dtype=np.float64)
    bn.gamma = rng.standard_normal(3)
    bn.beta = rng.standard_normal(3)
    x = rng.standard_normal((4, 3, 5, 5))
    g = rng.standard_normal(x.shape)
    _, cache = bn.forward(x.copy(), training=True)
    grad_x, grad_gamma, grad_beta = bn.backward(cache, g)

    def loss():
        probe = BatchNorm2d(3, dtype=np.float64)
        probe.gamma = bn.gamma
        probe.beta = bn.beta
        y, _ = probe.forward(x, training=True)
        return float(np.sum(y * g))

    assert max_rel_err(grad_x, finite_difference_grad(loss, x)) < 1e-5
    assert max_rel_err(grad_gamma, finite_difference_grad(loss, bn.gamma)) < 1e-6
    assert max_rel_err(grad_beta, finite_difference_grad(loss, bn.beta)) < 1e-6


def test_batchnorm_channel_mismatch():
    with pytest.raises(ShapeMismatch):
        BatchNorm2d(3).forward(np.zeros((1, 2, 2, 2)), training=True)
