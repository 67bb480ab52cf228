"""Loss, optimiser, and the training loop."""

import math
import os
import tempfile

import numpy as np
import pytest

from irisseg import paper_merged_spec
from irisseg.engine import SGDMomentum, TrainConfig, bce_loss, build_network, train
from irisseg.engine.loss import CLAMP_EPS
from irisseg.errors import EmptyInput, ShapeMismatch
from irisseg.netspec import INPUT_ID, LayerSpec, NetworkSpec

from reference import finite_difference_grad, max_rel_err


def test_bce_uninformative_prediction_is_ln2():
    p = np.full((2, 1, 4, 4), 0.5)
    t = np.zeros((2, 1, 4, 4))
    t[0] = 1
    loss, _ = bce_loss(p, t)
    assert abs(loss - math.log(2)) < 1e-12


def test_bce_perfect_prediction_hits_clamp_floor():
    t = np.array([[[[1.0, 0.0]]]])
    loss, _ = bce_loss(t.copy(), t)
    # exact predictions clamp to eps away from the labels
    assert abs(loss + math.log1p(-CLAMP_EPS)) < 1e-12
    assert loss < 1e-6


def test_bce_saturated_wrong_prediction_is_finite():
    t = np.array([[[[1.0]]]])
    p = np.array([[[[0.0]]]])
    loss, grad = bce_loss(p, t)
    assert abs(loss + math.log(CLAMP_EPS)) < 1e-9
    assert np.isfinite(grad).all()


def test_bce_hand_value():
    p = np.array([[[[0.8, 0.3]]]])
    t = np.array([[[[1.0, 0.0]]]])
    want = -(math.log(0.8) + math.log(0.7)) / 2
    loss, _ = bce_loss(p, t)
    assert abs(loss - want) < 1e-12


def test_bce_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.05, 0.95, (2, 1, 3, 3))
    t = (rng.random((2, 1, 3, 3)) > 0.5).astype(np.float64)
    _, grad = bce_loss(p, t)
    fd = finite_difference_grad(lambda: bce_loss(p, t)[0], p, h=1e-6)
    assert max_rel_err(grad, fd) < 1e-6


def test_bce_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        bce_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)))


def test_sgd_two_step_recurrence():
    p = np.array([1.0])
    opt = SGDMomentum([p], lr=0.1, momentum=0.5)
    opt.step([np.array([2.0])])
    # delta1 = -0.1 * 2 = -0.2
    assert abs(p[0] - 0.8) < 1e-15
    opt.step([np.array([-1.0])])
    # delta2 = 0.5 * (-0.2) + 0.1 = 0.0
    assert abs(p[0] - 0.8) < 1e-15
    opt.step([np.array([0.5])])
    # delta3 = 0.5 * 0.0 - 0.05 = -0.05
    assert abs(p[0] - 0.75) < 1e-15


def test_sgd_against_scalar_recurrence():
    rng = np.random.default_rng(1)
    p = np.array([0.3])
    opt = SGDMomentum([p], lr=0.07, momentum=0.9)
    w, v = 0.3, 0.0
    for _ in range(50):
        g = float(rng.standard_normal())
        opt.step([np.array([g])])
        v = 0.9 * v - 0.07 * g
        w += v
        assert abs(p[0] - w) < 1e-12


def test_sgd_zero_momentum_is_plain_sgd():
    p = np.array([1.0, 2.0])
    opt = SGDMomentum([p], lr=0.5, momentum=0.0)
    opt.step([np.array([1.0, -2.0])])
    assert np.allclose(p, [0.5, 3.0])


def test_sgd_updates_in_place_and_checks_arity():
    p = np.zeros(3)
    opt = SGDMomentum([p], lr=1.0)
    ident = id(p)
    opt.step([np.ones(3)])
    assert id(p) == ident and np.allclose(p, -1)
    with pytest.raises(ValueError):
        opt.step([np.ones(3), np.ones(3)])


def blob_sample():
    """One image whose mask is recoverable from local intensity."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(4)
    field = gaussian_filter(rng.standard_normal((16, 16)), 3)
    mask = (field > np.median(field)).astype(np.float64)[None]
    img = (0.3 + 0.4 * mask[0] + 0.1 * rng.standard_normal((16, 16))).clip(0, 1)[None]
    return img, mask


def test_single_sample_overfit():
    spec = NetworkSpec(
        (
            LayerSpec("a", 5, 1, 8, "relu", (INPUT_ID,)),
            LayerSpec("b", 5, 8, 8, "relu", ("a",)),
            LayerSpec("c", 5, 8, 1, "sigmoid", ("b",)),
        )
    )
    img, mask = blob_sample()
    net = build_network(spec, seed=1, dtype=np.float64)
    cfg = TrainConfig(epochs=500, batch_size=1, lr=0.05, momentum=0.9, seed=7)
    log = train(net, img, mask, cfg)
    assert [e for e, _ in log] == list(range(1, 501))
    assert log[-1][1] < 0.05
    assert log[-1][1] < log[49][1] < log[0][1]


def test_merged_network_loss_decreases():
    rng = np.random.default_rng(8)
    imgs = np.empty((8, 16, 16))
    masks = np.empty((8, 16, 16))
    from scipy.ndimage import gaussian_filter

    for i in range(8):
        field = gaussian_filter(rng.standard_normal((16, 16)), 3)
        masks[i] = field > np.median(field)
        imgs[i] = (0.3 + 0.4 * masks[i] + 0.1 * rng.standard_normal((16, 16))).clip(0, 1)
    net = build_network(paper_merged_spec(2), seed=2, dtype=np.float64)
    log = train(net, imgs, masks, TrainConfig(epochs=30, batch_size=4, seed=3))
    assert log[-1][1] < log[0][1]


def test_train_is_deterministic():
    rng = np.random.default_rng(9)
    imgs = rng.random((6, 8, 8))
    masks = (rng.random((6, 8, 8)) > 0.5).astype(np.uint8)
    spec = NetworkSpec(
        (
            LayerSpec("a", 3, 1, 4, "relu", (INPUT_ID,)),
            LayerSpec("b", 3, 4, 1, "sigmoid", ("a",)),
        )
    )
    cfg = TrainConfig(epochs=4, batch_size=4, seed=5)
    net_a = build_network(spec, seed=1, dtype=np.float32)
    net_b = build_network(spec, seed=1, dtype=np.float32)
    log_a = train(net_a, imgs, masks, cfg)
    log_b = train(net_b, imgs, masks, cfg)
    assert log_a == log_b
    for a, b in zip(net_a.params(), net_b.params()):
        assert np.array_equal(a, b)


def test_shuffle_seed_changes_trajectory():
    rng = np.random.default_rng(10)
    imgs = rng.random((6, 8, 8))
    masks = (rng.random((6, 8, 8)) > 0.5).astype(np.uint8)
    spec = NetworkSpec(
        (
            LayerSpec("a", 3, 1, 4, "relu", (INPUT_ID,)),
            LayerSpec("b", 3, 4, 1, "sigmoid", ("a",)),
        )
    )
    logs = []
    for seed in (0, 1):
        net = build_network(spec, seed=1, dtype=np.float64)
        logs.append(train(net, imgs, masks, TrainConfig(epochs=3, batch_size=2, seed=seed)))
    assert logs[0] != logs[1]


def test_train_writes_log_file():
    rng = np.random.default_rng(11)
    imgs = rng.random((2, 8, 8))
    masks = (rng.random((2, 8, 8)) > 0.5).astype(np.uint8)
    spec = NetworkSpec(
        (
            LayerSpec("a", 3, 1, 2, "relu", (INPUT_ID,)),
            LayerSpec("b", 3, 2, 1, "sigmoid", ("a",)),
        )
    )
    net = build_network(spec, seed=0)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "loss.csv")
        log = train(net, imgs, masks, TrainConfig(epochs=3, batch_size=2, seed=0), log_path=path)
        lines = open(path).read().splitlines()
    assert len(lines) == 3
    for (epoch, loss), line in zip(log, lines):
        e, l = line.split(",")
        assert int(e) == epoch
        assert float(l) == loss


def test_train_validates_inputs():
    spec = NetworkSpec(
        (
            LayerSpec("a", 3, 1, 2, "relu", (INPUT_ID,)),
            LayerSpec("b", 3, 2, 1, "sigmoid", ("a",)),
        )
    )
    net = build_network(spec, seed=0)
    with pytest.raises(EmptyInput):
        train(net, np.zeros((0, 4, 4)), np.zeros((0, 4, 4)), TrainConfig(epochs=1))
    with pytest.raises(ShapeMismatch):
        train(net, np.zeros((2, 4, 4)), np.zeros((2, 4, 5)), TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(net, np.zeros((2, 4, 4)), np.zeros((2, 4, 4)), TrainConfig(epochs=0))
