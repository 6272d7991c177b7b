"""Score normalization, weighting, aggregation, and the unsupervised
generalized-ESD detection path.

Raw detector scores are squashed into [0, 1] by robust 1%/99% training
quantiles, averaged under user weights, and the aggregate series is run
through Rosner's generalized extreme studentized deviate test to produce
the base unsupervised result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .detectors.base import RawScoreSeries
from .errors import ParameterError, RegistryError, ShapeError, SizeError
from .tdist import t_ppf

NORM_MIN_SPREAD = 1e-12


@dataclass(frozen=True)
class Normalizer:
    """Per-model robust score range fitted on training raw scores."""

    model_ids: tuple[str, ...]
    q01: np.ndarray
    q99: np.ndarray

    def __post_init__(self):
        q01 = np.asarray(self.q01, dtype=np.float64)
        q99 = np.asarray(self.q99, dtype=np.float64)
        if q01.shape != q99.shape or q01.shape != (len(self.model_ids),):
            raise ShapeError("quantile arrays must have one entry per model")
        if np.any(q01 > q99):
            raise ParameterError("q01 must not exceed q99")
        object.__setattr__(self, "q01", q01)
        object.__setattr__(self, "q99", q99)

    def column(self, model_id: str) -> int:
        try:
            return self.model_ids.index(model_id)
        except ValueError:
            raise RegistryError(f"unknown model id {model_id!r}") from None

    def to_dict(self) -> dict:
        return {
            "model_ids": list(self.model_ids),
            "q01": self.q01.tolist(),
            "q99": self.q99.tolist(),
        }

    @staticmethod
    def from_dict(d: Mapping) -> "Normalizer":
        return Normalizer(tuple(d["model_ids"]), np.array(d["q01"]), np.array(d["q99"]))


@dataclass(frozen=True)
class FeatureMatrix:
    """T x k matrix of normalized feature scores, one column per model."""

    model_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.model_ids):
            raise ShapeError("feature matrix must be T x k with one column per model")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ParameterError("feature scores must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return int(self.values.shape[0])

    @property
    def k(self) -> int:
        return len(self.model_ids)


@dataclass(frozen=True)
class EnsembleWeights:
    """Nonnegative per-model weights; default 1 per feature."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise ShapeError("weights must be one-dimensional")
        if (w < 0).any():
            raise ParameterError("weights must be nonnegative")
        if w.sum() <= 0:
            raise ParameterError("at least one weight must be positive")
        object.__setattr__(self, "w", w)

    @staticmethod
    def default(k: int) -> "EnsembleWeights":
        return EnsembleWeights(np.ones(k))


@dataclass(frozen=True)
class UnsupervisedResult:
    """ESD-flagged indices with confidences plus the full aggregate series."""

    flagged: frozenset[int]
    confidence: Mapping[int, float]
    aggregate_scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.aggregate_scores, dtype=np.float64)
        if set(self.confidence) != set(self.flagged):
            raise ShapeError("confidence must be defined exactly on flagged indices")
        if self.flagged and (min(self.flagged) < 0 or max(self.flagged) >= a.shape[0]):
            raise ShapeError("flagged index out of range")
        object.__setattr__(self, "aggregate_scores", a)
        object.__setattr__(self, "flagged", frozenset(int(i) for i in self.flagged))

    def to_dict(self) -> dict:
        return {
            "flagged": sorted(self.flagged),
            "confidence": {str(i): self.confidence[i] for i in sorted(self.flagged)},
        }


def fit_normalizer(raw: Sequence[RawScoreSeries]) -> Normalizer:
    """1st/99th empirical percentiles (linear interpolation) per model."""
    if not raw:
        raise ParameterError("need at least one score series")
    ids = []
    q01 = np.empty(len(raw))
    q99 = np.empty(len(raw))
    for i, series in enumerate(raw):
        if series.scores.size == 0:
            raise ParameterError(f"{series.model_id}: empty training scores")
        ids.append(series.model_id)
        q01[i] = np.percentile(series.scores, 1.0)
        q99[i] = np.percentile(series.scores, 99.0)
    if len(set(ids)) != len(ids):
        raise RegistryError("duplicate model ids")
    return Normalizer(tuple(ids), q01, q99)


def normalize_scores(raw: RawScoreSeries, norm: Normalizer) -> np.ndarray:
    """Clip-scaled scores in [0, 1]; a degenerate training range maps to 0."""
    j = norm.column(raw.model_id)
    return normalize_column(raw.scores, norm.q01[j], norm.q99[j])


def normalize_column(scores: np.ndarray, q01: float, q99: float) -> np.ndarray:
    spread = q99 - q01
    if spread < NORM_MIN_SPREAD:
        return np.zeros_like(np.asarray(scores, dtype=np.float64))
    return np.clip((scores - q01) / spread, 0.0, 1.0)


def build_feature_matrix(raw: Sequence[RawScoreSeries], norm: Normalizer) -> FeatureMatrix:
    if tuple(r.model_id for r in raw) != norm.model_ids:
        raise RegistryError("raw score series do not match normalizer model ids")
    columns = [normalize_scores(r, norm) for r in raw]
    return FeatureMatrix(norm.model_ids, np.column_stack(columns))


def apply_weights(matrix: FeatureMatrix, weights: EnsembleWeights) -> np.ndarray:
    """Columns multiplied by their weights; returns a plain T x k array."""
    if weights.w.shape[0] != matrix.k:
        raise ShapeError(f"{weights.w.shape[0]} weights for {matrix.k} models")
    return matrix.values * weights.w


def aggregate_weighted(weighted: np.ndarray, weights: EnsembleWeights) -> np.ndarray:
    """Weighted-average aggregate: row sums divided by the weight total."""
    weighted = np.asarray(weighted, dtype=np.float64)
    if weighted.ndim != 2 or weighted.shape[1] != weights.w.shape[0]:
        raise ShapeError("weighted matrix and weights disagree on k")
    return np.clip(weighted.sum(axis=1) / weights.w.sum(), 0.0, 1.0)


def esd_critical_value(n: int, i: int, alpha: float) -> float:
    """Rosner's lambda_i for the i-th removal out of n points."""
    df = n - i - 1
    p = 1.0 - alpha / (2.0 * (n - i + 1))
    t = t_ppf(p, df)
    return (n - i) * t / math.sqrt((df + t * t) * (n - i + 1))


def generalized_esd(x: np.ndarray, alpha: float = 0.05,
                    r_max: int | None = None) -> set[int]:
    """Rosner's generalized extreme studentized deviate test.

    Repeatedly removes the point with the largest studentized deviation,
    then declares the first i-hat removals outliers, where i-hat is the
    largest i whose statistic exceeds the t-based critical value.  A zero
    standard deviation at any step ends the removal phase.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("generalized_esd expects a one-dimensional series")
    n = x.shape[0]
    if n < 3:
        raise SizeError("generalized_esd needs at least 3 points")
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    if r_max is None:
        r_max = max(1, math.ceil(0.02 * n))
    r_max = min(int(r_max), n - 2)
    if r_max < 1:
        raise ParameterError("r_max must be >= 1")

    active = np.ones(n, dtype=bool)
    stats = []
    removed = []
    for _ in range(r_max):
        vals = x[active]
        mean = vals.mean()
        sd = vals.std(ddof=1)
        if sd == 0.0:
            break
        dev = np.where(active, np.abs(x - mean), -np.inf)
        j = int(np.argmax(dev))
        stats.append(dev[j] / sd)
        removed.append(j)
        active[j] = False

    n_outliers = 0
    for i in range(len(stats), 0, -1):
        if stats[i - 1] > esd_critical_value(n, i, alpha):
            n_outliers = i
            break
    return set(removed[:n_outliers])


def detect_unsupervised(matrix: FeatureMatrix, weights: EnsembleWeights | None = None,
                        alpha: float = 0.05, r_max: int | None = None) -> UnsupervisedResult:
    """Weighted-average the feature scores and flag ESD outliers on the result."""
    if weights is None:
        weights = EnsembleWeights.default(matrix.k)
    aggregate = aggregate_weighted(apply_weights(matrix, weights), weights)
    flagged = generalized_esd(aggregate, alpha=alpha, r_max=r_max)
    confidence = {int(t): float(aggregate[t]) for t in flagged}
    return UnsupervisedResult(frozenset(flagged), confidence, aggregate)
