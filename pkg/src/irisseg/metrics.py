"""Confusion counts and the twelve binary-segmentation metrics.

A metric whose denominator is zero on some image is *undefined* there:
it is reported as ``None``, excluded from the aggregate mean and
standard deviation, and counted.  The complement metrics (fdr, fpr,
fnr) and the combined ones (informedness, markedness) are computed
from their base metrics so the defining identities hold exactly.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonBinaryInput, ShapeMismatch

__all__ = [
    "METRIC_NAMES",
    "PERCENT_METRICS",
    "ConfusionCounts",
    "MetricReport",
    "confusion",
    "metrics",
    "aggregate",
    "format_report",
]

METRIC_NAMES = (
    "accuracy",
    "sensitivity",
    "specificity",
    "precision",
    "fdr",
    "npv",
    "f1",
    "mcc",
    "informedness",
    "markedness",
    "fpr",
    "fnr",
)

# Reported as percentages; the correlation-style metrics stay in [-1, 1].
PERCENT_METRICS = frozenset(METRIC_NAMES) - {"mcc", "informedness", "markedness"}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def p(self) -> int:
        """All positive cases in the ground truth."""
        return self.tp + self.fn

    @property
    def n(self) -> int:
        """All negative cases in the ground truth."""
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _check_binary(arr: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(arr)
    if not np.isin(a, (0, 1)).all():
        raise NonBinaryInput(f"{name} mask contains values other than 0 and 1")
    return a.astype(bool)


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Pixel counts with ``gt`` as truth and ``pred`` as the decision."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    p = _check_binary(pred, "prediction")
    g = _check_binary(gt, "ground truth")
    tp = int(np.count_nonzero(p & g))
    tn = int(np.count_nonzero(~p & ~g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(c: ConfusionCounts) -> dict[str, float | None]:
    """One row of all twelve metrics; ``None`` marks undefined entries."""
    if c.total <= 0:
        raise EmptyInput("confusion counts cover no pixels")
    sensitivity = _ratio(c.tp, c.p)
    specificity = _ratio(c.tn, c.n)
    precision = _ratio(c.tp, c.tp + c.fp)
    npv = _ratio(c.tn, c.tn + c.fn)
    denom2 = (
        (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    )
    if denom2:
        mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom2)
    else:
        mcc = None
    row: dict[str, float | None] = {
        "accuracy": (c.tp + c.tn) / c.total,
        "sensitivity": sensitivity,
        "specificity": specificity,
        "precision": precision,
        "fdr": None if precision is None else 1.0 - precision,
        "npv": npv,
        "f1": _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        "mcc": mcc,
        "informedness": (
            None
            if sensitivity is None or specificity is None
            else sensitivity + specificity - 1.0
        ),
        "markedness": (
            None if precision is None or npv is None else precision + npv - 1.0
        ),
        "fpr": None if specificity is None else 1.0 - specificity,
        "fnr": None if sensitivity is None else 1.0 - sensitivity,
    }
    return row


@dataclass(frozen=True)
class MetricReport:
    rows: tuple[dict[str, float | None], ...]
    mean: dict[str, float | None]
    std: dict[str, float | None]
    undefined: dict[str, int]


def aggregate(rows: list[dict[str, float | None]]) -> MetricReport:
    """Mean and population standard deviation per metric over the rows
    on which that metric is defined."""
    if not rows:
        raise EmptyInput("no metric rows to aggregate")
    mean: dict[str, float | None] = {}
    std: dict[str, float | None] = {}
    undefined: dict[str, int] = {}
    for name in METRIC_NAMES:
        values = [row[name] for row in rows if row[name] is not None]
        undefined[name] = len(rows) - len(values)
        if values:
            # exact-rational statistics: identical rows give sigma 0.0
            # and mean equal to the common value
            mean[name] = float(statistics.mean(values))
            std[name] = statistics.pstdev(values)
        else:
            mean[name] = None
            std[name] = None
    return MetricReport(rows=tuple(rows), mean=mean, std=std, undefined=undefined)


def _fmt(name: str, value: float | None) -> str:
    if value is None:
        return "undef"
    if name in PERCENT_METRICS:
        return f"{100 * value:.2f}%"
    return f"{value:.4f}"


def format_report(report: MetricReport) -> list[str]:
    """Rows of ``metric  mu  sigma`` lines, percentages for the ratio
    metrics and four decimals for the correlation-style ones."""
    width = max(len(n) for n in METRIC_NAMES)
    lines = [f"{'metric':<{width}}  {'mu':>8}  {'sigma':>8}  excluded"]
    for name in METRIC_NAMES:
        mu = _fmt(name, report.mean[name])
        sigma = _fmt(name, report.std[name])
        lines.append(
            f"{name:<{width}}  {mu:>8}  {sigma:>8}  {report.undefined[name]}"
        )
    return lines
