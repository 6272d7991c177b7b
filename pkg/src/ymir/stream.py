"""Online detection: replay batches through frozen artifacts.

Emission rule: row ``t`` is emitted once ``t + W_max`` rows have arrived,
where ``W_max`` is the widest window any component can touch.  Under that
rule every value a row needs is final when it is computed, so the per-row
helpers produce exactly the offline numbers regardless of how the stream
is batched; the remaining tail rows (whose values depend on where the
series ends) are emitted by :meth:`StreamContext.finalize`, which also runs
the global ESD flag pass over the accumulated aggregate series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierModel
from .detectors.base import FittedDetector, SeriesView, validate_scores
from .ensemble import (
    EnsembleWeights,
    Normalizer,
    UnsupervisedResult,
    generalized_esd,
    normalize_column,
)
from .errors import ShapeError, SizeError, StreamError


@dataclass(frozen=True)
class EmittedRow:
    index: int
    timestamp: int
    feature_scores: np.ndarray
    aggregate: float
    classifier: float | None


class StreamContext:
    """Single-writer streaming scorer over fitted artifacts."""

    def __init__(self, detectors: list[FittedDetector], model_ids: list[str],
                 normalizer: Normalizer, weights: EnsembleWeights,
                 classifier: ClassifierModel | None = None,
                 esd_alpha: float = 0.05, esd_r_max_frac: float = 0.02):
        if tuple(model_ids) != normalizer.model_ids:
            raise ShapeError("model ids do not match the normalizer")
        if not detectors or len(detectors) != len(model_ids):
            raise ShapeError("one model id per detector required")
        self.detectors = list(detectors)
        self.model_ids = tuple(model_ids)
        self.normalizer = normalizer
        self.weights = weights
        self.classifier = classifier
        self.esd_alpha = esd_alpha
        self.esd_r_max_frac = esd_r_max_frac
        self.n_metrics = detectors[0].n_metrics

        max_fwd = max(det.fwd for det in self.detectors)
        spans = [det.window_span for det in self.detectors]
        if classifier is not None:
            w = classifier.window
            spans.append(w)
            # Features for a center's window reach max_fwd rows past its end.
            spans.append(w - 1 - w // 2 + max_fwd + 1)
        self.w_max = max(spans)
        self._keep_back = self.w_max + (classifier.window if classifier else 0)

        self._values = np.empty((0, self.n_metrics))
        self._stamps = np.empty(0, dtype=np.int64)
        self._base = 0
        self._length = 0
        self._emitted = 0
        self._spacing: int | None = None
        self._aggregate_history: list[float] = []
        self._feat_cache: dict[int, np.ndarray] = {}
        self._det_caches: list[dict] = [{} for _ in self.detectors]
        self._center_probs: dict[int, float] = {}
        self._finalized = False

    @property
    def length(self) -> int:
        return self._length

    def append(self, timestamps: np.ndarray, values: np.ndarray) -> list[EmittedRow]:
        """Add a batch and return every newly computable row."""
        if self._finalized:
            raise StreamError("stream already finalized")
        timestamps = np.asarray(timestamps, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != timestamps.shape[0]:
            raise ShapeError("batch must be (rows,) timestamps with (rows, n) values")
        if values.shape[1] != self.n_metrics:
            raise ShapeError(
                f"batch has {values.shape[1]} metrics, artifacts expect {self.n_metrics}"
            )
        if timestamps.shape[0] == 0:
            return []
        if not np.isfinite(values).all():
            raise StreamError("batch contains non-finite values")

        # Validate continuity before touching any state.
        if self._length:
            combined = np.concatenate([self._stamps[-1:], timestamps])
        else:
            combined = timestamps
        diffs = np.diff(combined)
        spacing = self._spacing
        if diffs.size:
            spacing = spacing if spacing is not None else int(diffs[0])
            if spacing <= 0 or np.any(diffs != spacing):
                raise StreamError("timestamp gap: batch does not continue the stream uniformly")

        self._spacing = spacing
        self._values = np.concatenate([self._values, values])
        self._stamps = np.concatenate([self._stamps, timestamps])
        self._length += timestamps.shape[0]

        rows = self._emit_until(self._length - self.w_max + 1)
        self._trim()
        return rows

    def finalize(self) -> tuple[list[EmittedRow], UnsupervisedResult]:
        """Emit the tail rows and run the ESD flag pass over the aggregate."""
        if self._finalized:
            raise StreamError("stream already finalized")
        self._finalized = True
        rows = self._emit_until(self._length)
        aggregate = np.array(self._aggregate_history)
        if aggregate.shape[0] >= 3:
            flagged = generalized_esd(
                aggregate,
                alpha=self.esd_alpha,
                r_max=max(1, int(np.ceil(self.esd_r_max_frac * aggregate.shape[0]))),
            )
        else:
            flagged = set()
        confidence = {int(t): float(aggregate[t]) for t in flagged}
        return rows, UnsupervisedResult(frozenset(flagged), confidence, aggregate)

    # -- internals ---------------------------------------------------------

    def _view(self) -> SeriesView:
        return SeriesView(self._values, self._stamps, self._base)

    def _emit_until(self, stop: int) -> list[EmittedRow]:
        rows = []
        view = self._view()
        while self._emitted < stop:
            rows.append(self._emit_row(view, self._emitted))
            self._emitted += 1
        return rows

    def _feature_row(self, view: SeriesView, t: int) -> np.ndarray:
        cached = self._feat_cache.get(t)
        if cached is not None:
            return cached
        row = np.empty(len(self.detectors))
        for j, det in enumerate(self.detectors):
            raw = det.score_range(view, t, t + 1, cache=self._det_caches[j])
            raw = validate_scores(det.kind, raw, 1)
            row[j] = normalize_column(raw, self.normalizer.q01[j], self.normalizer.q99[j])[0]
        self._feat_cache[t] = row
        return row

    def _classifier_prob(self, view: SeriesView, t: int) -> float | None:
        model = self.classifier
        if model is None:
            return None
        w = model.window
        if view.end < w:
            raise SizeError(f"classifier window {w} exceeds series length {view.end}")
        first_center = w // 2
        last_center = first_center + (view.end - w)
        center = min(max(t, first_center), last_center)
        cached = self._center_probs.get(center)
        if cached is not None:
            return cached
        start = center - first_center
        feats = np.empty((w, model.n_features))
        for i in range(w):
            feats[i] = self._feature_row(view, start + i)
        prob = model.window_probability(view.rows(start, start + w), feats)
        self._center_probs[center] = prob
        return prob

    def _emit_row(self, view: SeriesView, t: int) -> EmittedRow:
        feats = self._feature_row(view, t)
        weighted = feats * self.weights.w
        aggregate = float(np.clip(weighted.sum() / self.weights.w.sum(), 0.0, 1.0))
        self._aggregate_history.append(aggregate)
        prob = self._classifier_prob(view, t)
        return EmittedRow(t, int(view.stamps(t, t + 1)[0]), feats, aggregate, prob)

    def _trim(self) -> None:
        keep_from = max(0, self._emitted - self._keep_back)
        if keep_from > self._base:
            cut = keep_from - self._base
            self._values = self._values[cut:].copy()
            self._stamps = self._stamps[cut:].copy()
            self._base = keep_from
        for t in [t for t in self._feat_cache if t < keep_from]:
            del self._feat_cache[t]
        for t in [t for t in self._center_probs if t < keep_from]:
            del self._center_probs[t]
        for cache in self._det_caches:
            for t in [t for t in cache if t < keep_from]:
                del cache[t]
