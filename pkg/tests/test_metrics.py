"""Confusion counting and the twelve-metric report."""

import math

import numpy as np
import pytest

from irisseg.errors import EmptyInput, NonBinaryInput, ShapeMismatch
from irisseg.metrics import (
    METRIC_NAMES,
    ConfusionCounts,
    MetricReport,
    aggregate,
    confusion,
    format_report,
    metrics,
)

from reference import mean_std_ref, metrics_ref


def random_mask_pair(rng, shape=(16, 16)):
    return (
        (rng.random(shape) > rng.uniform(0.2, 0.8)).astype(np.uint8),
        (rng.random(shape) > rng.uniform(0.2, 0.8)).astype(np.uint8),
    )


def test_confusion_on_identical_masks():
    gt = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    c = confusion(gt, gt)
    assert (c.tp, c.tn, c.fp, c.fn) == (2, 2, 0, 0)


def test_confusion_on_inverted_masks():
    gt = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    c = confusion(1 - gt, gt)
    assert (c.tp, c.tn, c.fp, c.fn) == (0, 0, 2, 2)


def test_confusion_matches_pixel_loop():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pred, gt = random_mask_pair(rng)
        c = confusion(pred, gt)
        ref = metrics_ref(pred, gt)
        assert c.total == pred.size
        assert abs(c.tp / max(c.p, 1) - (ref["sensitivity"] or 0)) < 1e-15 or c.p == 0


def test_confusion_counts_and_marginals():
    pred = np.array([1, 1, 0, 0, 1], dtype=np.uint8)
    gt = np.array([1, 0, 0, 1, 1], dtype=np.uint8)
    c = confusion(pred, gt)
    assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 1, 1)
    assert c.p == 3 and c.n == 2 and c.total == 5


def test_confusion_input_validation():
    with pytest.raises(ShapeMismatch):
        confusion(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(NonBinaryInput):
        confusion(np.array([0, 2]), np.array([0, 1]))
    with pytest.raises(NonBinaryInput):
        confusion(np.array([0, 1]), np.array([0.5, 1.0]))


def test_bool_masks_accepted():
    pred = np.array([True, False])
    gt = np.array([False, False])
    c = confusion(pred, gt)
    assert (c.tp, c.tn, c.fp, c.fn) == (0, 1, 1, 0)


def test_perfect_classifier():
    row = metrics(ConfusionCounts(tp=50, tn=50, fp=0, fn=0))
    assert row["accuracy"] == 1.0
    assert row["mcc"] == 1.0
    assert row["f1"] == 1.0
    assert row["informedness"] == 1.0
    assert row["fdr"] == 0.0 and row["fpr"] == 0.0 and row["fnr"] == 0.0


def test_inverted_classifier():
    row = metrics(ConfusionCounts(tp=0, tn=0, fp=50, fn=50))
    assert row["mcc"] == -1.0
    assert row["informedness"] == -1.0
    assert row["accuracy"] == 0.0


def test_hand_computed_row():
    row = metrics(ConfusionCounts(tp=40, fn=10, fp=5, tn=45))
    assert abs(row["sensitivity"] - 0.8) < 1e-15
    assert abs(row["specificity"] - 0.9) < 1e-15
    assert abs(row["precision"] - 8 / 9) < 1e-15
    assert abs(row["f1"] - 80 / 95) < 1e-15
    want_mcc = (40 * 45 - 5 * 10) / math.sqrt(45 * 50 * 50 * 55)
    assert abs(row["mcc"] - want_mcc) < 1e-15
    assert abs(row["mcc"] - 0.7035264706814484) < 1e-12


def test_rows_match_oracle_on_random_masks():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pred, gt = random_mask_pair(rng)
        row = metrics(confusion(pred, gt))
        ref = metrics_ref(pred, gt)
        for name in METRIC_NAMES:
            a, b = row[name], ref[name]
            assert (a is None) == (b is None), name
            if a is not None:
                assert abs(a - b) < 1e-12, name


def test_complement_identities_hold_exactly():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pred, gt = random_mask_pair(rng)
        row = metrics(confusion(pred, gt))
        if row["precision"] is not None:
            assert row["fdr"] == 1.0 - row["precision"]
        if row["specificity"] is not None:
            assert row["fpr"] == 1.0 - row["specificity"]
        if row["sensitivity"] is not None:
            assert row["fnr"] == 1.0 - row["sensitivity"]
        if row["informedness"] is not None:
            assert row["informedness"] == row["sensitivity"] + row["specificity"] - 1
        if row["markedness"] is not None:
            assert row["markedness"] == row["precision"] + row["npv"] - 1


def test_bounded_ranges():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pred, gt = random_mask_pair(rng)
        row = metrics(confusion(pred, gt))
        for name in METRIC_NAMES:
            v = row[name]
            if v is None:
                continue
            if name in ("mcc", "informedness", "markedness"):
                assert -1.0 <= v <= 1.0
            else:
                assert 0.0 <= v <= 1.0


def test_transposition_invariance():
    rng = np.random.default_rng(4)
    pred, gt = random_mask_pair(rng)
    assert metrics(confusion(pred, gt)) == metrics(confusion(pred.T, gt.T))


def test_swap_symmetry():
    # Swapping decision and truth swaps sensitivity<->precision,
    # npv<->specificity, and preserves f1 and mcc.
    rng = np.random.default_rng(5)
    for _ in range(20):
        pred, gt = random_mask_pair(rng)
        a = metrics(confusion(pred, gt))
        b = metrics(confusion(gt, pred))
        assert a["sensitivity"] == b["precision"]
        assert a["precision"] == b["sensitivity"]
        assert a["npv"] == b["specificity"]
        assert a["specificity"] == b["npv"]
        assert a["f1"] == b["f1"]
        if a["mcc"] is not None:
            assert abs(a["mcc"] - b["mcc"]) < 1e-15


def test_undefined_cases():
    # all-negative truth and prediction: no positives anywhere
    row = metrics(ConfusionCounts(tp=0, tn=100, fp=0, fn=0))
    assert row["sensitivity"] is None and row["fnr"] is None
    assert row["precision"] is None and row["fdr"] is None
    assert row["f1"] is None
    assert row["mcc"] is None
    assert row["informedness"] is None and row["markedness"] is None
    assert row["specificity"] == 1.0 and row["accuracy"] == 1.0

    # f1 defined whenever 2tp + fp + fn > 0
    row = metrics(ConfusionCounts(tp=0, tn=10, fp=3, fn=0))
    assert row["f1"] == 0.0
    assert row["mcc"] is None  # tp+fn = 0 marginal


def test_metrics_rejects_empty_counts():
    with pytest.raises(EmptyInput):
        metrics(ConfusionCounts(0, 0, 0, 0))


def test_aggregate_identical_rows():
    row = metrics(ConfusionCounts(tp=40, fn=10, fp=5, tn=45))
    report = aggregate([row, row, row])
    for name in METRIC_NAMES:
        assert report.std[name] == 0.0
        assert report.mean[name] == row[name]
        assert report.undefined[name] == 0


def test_aggregate_two_point_std():
    rows = [
        metrics(ConfusionCounts(tp=90, tn=0, fp=0, fn=10)),
        metrics(ConfusionCounts(tp=100, tn=0, fp=0, fn=0)),
    ]
    report = aggregate(rows)
    assert abs(report.mean["accuracy"] - 0.95) < 1e-15
    assert abs(report.std["accuracy"] - 0.05) < 1e-15


def test_aggregate_matches_two_pass_reference():
    rng = np.random.default_rng(6)
    rows = []
    for _ in range(100):
        pred, gt = random_mask_pair(rng)
        rows.append(metrics(confusion(pred, gt)))
    report = aggregate(rows)
    for name in METRIC_NAMES:
        values = [r[name] for r in rows if r[name] is not None]
        if not values:
            continue
        mean, std = mean_std_ref(values)
        assert abs(report.mean[name] - mean) < 1e-12
        assert abs(report.std[name] - std) < 1e-12


def test_aggregate_excludes_and_counts_undefined():
    rows = [
        metrics(ConfusionCounts(tp=0, tn=100, fp=0, fn=0)),  # sensitivity undefined
        metrics(ConfusionCounts(tp=40, fn=10, fp=5, tn=45)),
        metrics(ConfusionCounts(tp=30, fn=20, fp=15, tn=35)),
    ]
    report = aggregate(rows)
    assert report.undefined["sensitivity"] == 1
    assert report.undefined["accuracy"] == 0
    defined = [rows[1]["sensitivity"], rows[2]["sensitivity"]]
    assert abs(report.mean["sensitivity"] - sum(defined) / 2) < 1e-15


def test_aggregate_all_undefined():
    rows = [metrics(ConfusionCounts(tp=0, tn=10, fp=0, fn=0))]
    report = aggregate(rows)
    assert report.mean["sensitivity"] is None
    assert report.std["sensitivity"] is None
    assert report.undefined["sensitivity"] == 1


def test_aggregate_rejects_empty():
    with pytest.raises(EmptyInput):
        aggregate([])


def test_format_report_layout():
    row = metrics(ConfusionCounts(tp=40, fn=10, fp=5, tn=45))
    lines = format_report(aggregate([row]))
    assert len(lines) == 1 + len(METRIC_NAMES)
    accuracy_line = lines[1]
    assert accuracy_line.startswith("accuracy")
    assert "85.00%" in accuracy_line
    mcc_line = next(l for l in lines if l.startswith("mcc"))
    assert "0.7035" in mcc_line
    undef = format_report(
        aggregate([metrics(ConfusionCounts(tp=0, tn=10, fp=0, fn=0))])
    )
    assert any("undef" in l for l in undef)
