"""Range-based precision, recall, and best-F1 threshold sweeping.

Anomalies are scored as ranges rather than points: a real range earns
credit for being found at all (existence) and for how much of it the
predictions cover (overlap under a flat positional bias).  Precision is the
mirror image over predicted ranges.  ``best_range_f1`` sweeps thresholds
over the open score interval and reports the best operating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import LabelSeries
from .errors import ContractError, ParameterError, ShapeError


@dataclass(frozen=True)
class RangeSet:
    """Disjoint, sorted, inclusive (start, end) index ranges."""

    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        ranges = tuple((int(s), int(e)) for s, e in self.ranges)
        prev_end = None
        for s, e in ranges:
            if s > e:
                raise ShapeError(f"range ({s}, {e}) has start > end")
            if prev_end is not None and s <= prev_end:
                raise ShapeError("ranges must be disjoint and sorted")
            prev_end = e
        object.__setattr__(self, "ranges", ranges)

    def __len__(self) -> int:
        return len(self.ranges)

    def covered(self) -> int:
        return sum(e - s + 1 for s, e in self.ranges)


@dataclass(frozen=True)
class MetricParams:
    """Range-metric knobs: existence weight alpha, flat positional bias,
    constant cardinality factor."""

    alpha_existence: float = 0.0
    positional_bias: str = "flat"
    cardinality_gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha_existence <= 1.0:
            raise ParameterError("alpha must lie in [0, 1]")
        if self.positional_bias != "flat":
            raise ParameterError("only the flat positional bias is implemented")
        if self.cardinality_gamma != 1.0:
            raise ParameterError("only the constant cardinality factor 1 is implemented")


def extract_ranges(binary: Sequence[int]) -> RangeSet:
    """Maximal runs of 1s as inclusive ranges."""
    arr = np.asarray(binary)
    if arr.ndim != 1:
        raise ShapeError("binary sequence must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ParameterError("values must be 0 or 1")
    ranges = []
    start = None
    for i, v in enumerate(arr):
        if v == 1 and start is None:
            start = i
        elif v == 0 and start is not None:
            ranges.append((start, i - 1))
            start = None
    if start is not None:
        ranges.append((start, len(arr) - 1))
    return RangeSet(tuple(ranges))


def _overlap_length(r: tuple[int, int], others: RangeSet) -> int:
    s, e = r
    total = 0
    for os, oe in others.ranges:
        lo = max(s, os)
        hi = min(e, oe)
        if lo <= hi:
            total += hi - lo + 1
    return total


def _range_score(units: RangeSet, others: RangeSet, alpha: float) -> float:
    """Mean of alpha*existence + (1-alpha)*cardinality*overlap over units."""
    if len(units) == 0:
        return 1.0
    total = 0.0
    for r in units.ranges:
        covered = _overlap_length(r, others)
        existence = 1.0 if covered > 0 else 0.0
        overlap = covered / (r[1] - r[0] + 1)
        total += alpha * existence + (1.0 - alpha) * overlap
    return total / len(units)


def range_recall(real: RangeSet, pred: RangeSet,
                 params: MetricParams = MetricParams()) -> float:
    """Fraction of real anomaly ranges recovered, range-based."""
    return _range_score(real, pred, params.alpha_existence)


def range_precision(real: RangeSet, pred: RangeSet,
                    params: MetricParams = MetricParams()) -> float:
    """Fraction of predicted ranges that land on real anomalies (alpha is
    forced to 0 for precision)."""
    return _range_score(pred, real, 0.0)


def range_f1(real: RangeSet, pred: RangeSet,
             params: MetricParams = MetricParams()) -> float:
    p = range_precision(real, pred, params)
    r = range_recall(real, pred, params)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvaluationReport:
    best_f1: float
    threshold: float
    precision: float
    recall: float
    curve: tuple[SweepPoint, ...]

    def to_dict(self) -> dict:
        return {
            "best_f1": self.best_f1,
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "curve": [
                {"threshold": p.threshold, "precision": p.precision,
                 "recall": p.recall, "f1": p.f1}
                for p in self.curve
            ],
        }


def best_range_f1(scores: np.ndarray, truth: LabelSeries, thresholds: int = 100,
                  params: MetricParams = MetricParams()) -> EvaluationReport:
    """Sweep thresholds over the open (min, max) score interval and return
    the best range F1 with its operating point.

    Requires fully labeled truth; binarization is inclusive (score >= theta).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (truth.length,):
        raise ShapeError("scores and truth must have the same length")
    if not truth.fully_labeled:
        raise ContractError("evaluation requires full labels")
    if thresholds < 1:
        raise ParameterError("need at least one threshold")
    real = extract_ranges(truth.labels)
    lo, hi = float(scores.min()), float(scores.max())
    if hi <= lo:
        return EvaluationReport(0.0, lo, 0.0, 0.0, ())

    curve = []
    best = None
    grid = lo + (hi - lo) * (np.arange(1, thresholds + 1) / (thresholds + 1))
    for theta in grid:
        pred = extract_ranges((scores >= theta).astype(np.int8))
        p = range_precision(real, pred, params)
        r = range_recall(real, pred, params)
        f1 = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
        point = SweepPoint(float(theta), p, r, f1)
        curve.append(point)
        if best is None or f1 > best.f1:
            best = point
    return EvaluationReport(best.f1, best.threshold, best.precision, best.recall,
                            tuple(curve))
