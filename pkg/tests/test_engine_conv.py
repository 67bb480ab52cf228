"""Convolution engine against the naive loop oracle and finite differences."""

import numpy as np
import pytest

from irisseg.engine.fftconv import conv2d_backward, conv2d_forward, fast_len

from reference import conv2d_ref, finite_difference_grad, max_rel_err

SHAPES = [
    # (batch, c_in, c_out, height, width, kernel)
    (2, 3, 4, 9, 11, 3),
    (1, 1, 1, 5, 5, 1),
    (3, 2, 5, 8, 6, 7),
    (2, 4, 3, 13, 9, 5),
    (1, 2, 2, 4, 16, 9),
]


@pytest.mark.parametrize(
    "n,expected",
    [
        (1, 1),
        (2, 2),
        (3, 3),
        (7, 8),
        (11, 12),
        (13, 15),
        (17, 18),
        (31, 32),
        (50, 50),
        (61, 64),
        (66, 72),
        (97, 100),
        (101, 108),
        (127, 128),
    ],
)
def test_fast_len_values(n, expected):
    assert fast_len(n) == expected


def test_fast_len_is_smooth_and_minimal():
    def smooth(m):
        for f in (2, 3, 5):
            while m % f == 0:
                m //= f
        return m == 1

    for n in range(1, 300):
        m = fast_len(n)
        assert m >= n and smooth(m)
        assert not any(smooth(j) for j in range(n, m))


def test_fast_len_rejects_nonpositive():
    with pytest.raises(ValueError):
        fast_len(0)


def test_forward_ones_kernel_counts_window():
    # All-ones input and kernel: each output counts the in-bounds
    # window cells times the channel count.
    x = np.ones((1, 3, 6, 6))
    w = np.ones((1, 3, 3, 3))
    y = conv2d_forward(x, w)
    assert y[0, 0, 3, 3] == 27  # interior: 3*3*3
    assert y[0, 0, 0, 0] == 12  # corner: 2*2*3
    assert y[0, 0, 0, 3] == 18  # edge: 2*3*3


def test_forward_identity_kernel_passes_input():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 1, 7, 9))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    assert np.allclose(conv2d_forward(x, w), x, atol=1e-12)


def test_forward_offset_kernel_shifts():
    # A single weight off centre correlates with the shifted input.
    x = np.arange(25, dtype=float).reshape(1, 1, 5, 5)
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 2, 1] = 1.0  # one row below centre
    y = conv2d_forward(x, w)
    assert np.allclose(y[0, 0, :4], x[0, 0, 1:])
    assert np.allclose(y[0, 0, 4], 0)


@pytest.mark.parametrize("shape", SHAPES)
def test_forward_matches_loop_oracle(shape):
    b, ci, co, h, w, k = shape
    rng = np.random.default_rng(hash(shape) % 2**32)
    x = rng.standard_normal((b, ci, h, w))
    ww = rng.standard_normal((co, ci, k, k))
    assert max_rel_err(conv2d_forward(x, ww), conv2d_ref(x, ww)) < 1e-10


@pytest.mark.parametrize("shape", SHAPES)
def test_gradients_match_finite_differences(shape):
    b, ci, co, h, w, k = shape
    rng = np.random.default_rng(hash(shape) % 2**31)
    x = rng.standard_normal((b, ci, h, w))
    ww = rng.standard_normal((co, ci, k, k))
    g = rng.standard_normal((b, co, h, w))
    grad_x, grad_w = conv2d_backward(x, ww, g)

    def loss():
        return float(np.sum(conv2d_ref(x, ww) * g))

    assert max_rel_err(grad_x, finite_difference_grad(loss, x)) < 1e-5
    assert max_rel_err(grad_w, finite_difference_grad(loss, ww)) < 1e-5


def test_float32_path_keeps_dtype_and_accuracy():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 3, 10, 12)).astype(np.float32)
    w = rng.standard_normal((4, 3, 5, 5)).astype(np.float32)
    y = conv2d_forward(x, w)
    gx, gw = conv2d_backward(x, w, y)
    assert y.dtype == gx.dtype == gw.dtype == np.float32
    ref = conv2d_ref(x.astype(np.float64), w.astype(np.float64))
    assert max_rel_err(y, ref) < 1e-4


def test_channel_mismatch_rejected():
    with pytest.raises(ValueError):
        conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)))
