"""Detector registry, fitted-state protocol, and scoring dispatch.

Every detector fits on a training :class:`~ymir.data.TimeSeriesSet` and then
emits one nonnegative raw score per timestamp of any scored segment.  Scores
are defined *per row*: the value at row ``t`` may depend only on rows
``[t - back, t + fwd]`` (plus, for the first ``prefix`` rows, on rows
``[0, prefix)``).  Both offline scoring and the streaming context call the
same per-row code with identical slices, which is what makes streamed and
offline outputs bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..data import TimeSeriesSet
from ..errors import ContractError, RegistryError, ShapeError

EPS = 1e-8


@dataclass(frozen=True)
class DetectorSpec:
    """Recipe for one ensemble member: a registry kind plus its parameters."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    weight_hint: float | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": dict(self.params)}
        if self.weight_hint is not None:
            d["weight_hint"] = self.weight_hint
        return d

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "DetectorSpec":
        return DetectorSpec(
            kind=str(d["kind"]),
            params=dict(d.get("params", {})),
            weight_hint=d.get("weight_hint"),
        )


@dataclass(frozen=True)
class RawScoreSeries:
    """One model's raw decision-boundary series over a scored segment."""

    model_id: str
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise ShapeError("scores must be one-dimensional")
        object.__setattr__(self, "scores", scores)


class SeriesView:
    """Rows of a logical series addressed by absolute index.

    A plain in-memory series has ``base == 0``; a streaming buffer that has
    dropped old rows exposes only ``[base, end)``.  ``end`` is the number of
    rows known so far, which during streaming is less than the final length.
    """

    __slots__ = ("_values", "_stamps", "base")

    def __init__(self, values: np.ndarray, timestamps: np.ndarray, base: int = 0):
        self._values = values
        self._stamps = timestamps
        self.base = base

    @classmethod
    def of(cls, ts: TimeSeriesSet) -> "SeriesView":
        return cls(ts.values, ts.timestamps, 0)

    @property
    def end(self) -> int:
        return self.base + self._values.shape[0]

    @property
    def width(self) -> int:
        return int(self._values.shape[1])

    def rows(self, a: int, b: int) -> np.ndarray:
        if a < self.base or b > self.end:
            raise ShapeError(f"rows [{a}, {b}) outside buffered range [{self.base}, {self.end})")
        return self._values[a - self.base : b - self.base]

    def stamps(self, a: int, b: int) -> np.ndarray:
        if a < self.base or b > self.end:
            raise ShapeError(f"rows [{a}, {b}) outside buffered range [{self.base}, {self.end})")
        return self._stamps[a - self.base : b - self.base]


class FittedDetector:
    """Immutable fitted state; subclasses implement per-row scoring."""

    kind: str = ""
    # Context contract: row t reads rows [t-back, t+fwd]; rows with
    # t < prefix additionally read rows [0, prefix).
    back = 0
    fwd = 0
    prefix = 0

    def __init__(self, n_metrics: int, train_len: int):
        self.n_metrics = int(n_metrics)
        self.train_len = int(train_len)

    @property
    def window_span(self) -> int:
        """Widest stretch of rows any single score can touch."""
        return max(self.back + self.fwd + 1, self.prefix)

    def check_width(self, width: int) -> None:
        if width != self.n_metrics:
            raise ShapeError(
                f"{self.kind}: fitted on {self.n_metrics} metrics, got {width}"
            )

    def score_range(self, view: SeriesView, lo: int, hi: int,
                    cache: dict | None = None) -> np.ndarray:
        """Scores for rows [lo, hi); ``cache`` may carry reusable per-window
        intermediates across calls on the same logical series."""
        raise NotImplementedError

    def score(self, ts: TimeSeriesSet) -> np.ndarray:
        """Score a whole segment offline."""
        view = SeriesView.of(ts)
        return self.score_range(view, 0, ts.length, cache={})

    def state_dict(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_state(cls, state: Mapping[str, Any]) -> "FittedDetector":
        raise NotImplementedError


class UnivariateDetector(FittedDetector):
    """Base for per-metric detectors; metric scores combine by pointwise max."""

    def metric_row(self, view: SeriesView, j: int, t: int) -> float:
        raise NotImplementedError

    def score_range(self, view: SeriesView, lo: int, hi: int,
                    cache: dict | None = None) -> np.ndarray:
        self.check_width(view.width)
        out = np.empty(hi - lo, dtype=np.float64)
        for t in range(lo, hi):
            best = 0.0
            for j in range(self.n_metrics):
                s = self.metric_row(view, j, t)
                if s > best:
                    best = s
            out[t - lo] = best
        return out


_FitFn = Callable[[DetectorSpec, TimeSeriesSet], FittedDetector]

_BUILTIN_KINDS: dict[str, _FitFn] = {}
_BUILTIN_CLASSES: dict[str, type] = {}
_USER_KINDS: dict[str, tuple[Callable, Callable, int, int]] = {}

USER_PREFIX = "user_defined:"


def builtin_kind(name: str):
    """Class decorator registering a built-in detector kind."""

    def wrap(cls):
        cls.kind = name
        _BUILTIN_KINDS[name] = cls.fit
        _BUILTIN_CLASSES[name] = cls
        return cls

    return wrap


def known_kinds() -> tuple[str, ...]:
    return tuple(_BUILTIN_KINDS) + tuple(USER_PREFIX + n for n in _USER_KINDS)


def register_user_detector(name: str, fit_fn: Callable, score_fn: Callable,
                           back: int = 0, fwd: int = 0) -> str:
    """Register a custom detector under ``user_defined:<name>``.

    ``fit_fn(train, params) -> state`` runs once on the training segment;
    ``score_fn(state, ts) -> scores`` must return one finite nonnegative
    value per row and may only look ``back``/``fwd`` rows around each scored
    row (0/0 means pointwise), which keeps streamed output consistent.
    The state must be JSON-serializable for persistence.
    """
    if not name or any(ch in name for ch in ":,"):
        raise RegistryError(f"invalid user detector name {name!r}")
    if name in _USER_KINDS:
        raise RegistryError(f"user detector {name!r} already registered")
    if back < 0 or fwd < 0:
        raise RegistryError("context sizes must be nonnegative")
    _USER_KINDS[name] = (fit_fn, score_fn, back, fwd)
    return USER_PREFIX + name


def unregister_user_detector(name: str) -> None:
    _USER_KINDS.pop(name, None)


class UserDetector(FittedDetector):
    """Adapter running a registered user fit/score pair."""

    def __init__(self, name: str, state: Any, n_metrics: int, train_len: int):
        super().__init__(n_metrics, train_len)
        if name not in _USER_KINDS:
            raise RegistryError(f"user detector {name!r} is not registered")
        self.name = name
        self.kind = USER_PREFIX + name
        self.user_state = state
        _, self._score_fn, self.back, self.fwd = _USER_KINDS[name]

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "UserDetector":
        name = spec.kind[len(USER_PREFIX):]
        if name not in _USER_KINDS:
            raise RegistryError(f"user detector {name!r} is not registered")
        fit_fn = _USER_KINDS[name][0]
        state = fit_fn(train, dict(spec.params))
        return cls(name, state, train.n_metrics, train.length)

    def score_range(self, view: SeriesView, lo: int, hi: int,
                    cache: dict | None = None) -> np.ndarray:
        self.check_width(view.width)
        a = max(0, lo - self.back)
        b = min(view.end, hi + self.fwd)
        segment = TimeSeriesSet(view.stamps(a, b).copy(), view.rows(a, b).copy(), tuple(f"m{i}" for i in range(view.width)))
        scores = np.asarray(self._score_fn(self.user_state, segment), dtype=np.float64)
        if scores.shape != (b - a,):
            raise ContractError(
                f"user detector {self.name!r} returned {scores.shape}, expected ({b - a},)"
            )
        return scores[lo - a : lo - a + (hi - lo)]

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_metrics": self.n_metrics,
            "train_len": self.train_len,
            "user_state": self.user_state,
        }

    @classmethod
    def from_state(cls, state: Mapping[str, Any]) -> "UserDetector":
        name = str(state["kind"])[len(USER_PREFIX):]
        return cls(name, state["user_state"], int(state["n_metrics"]), int(state["train_len"]))


def fit_detector(spec: DetectorSpec, train: TimeSeriesSet) -> FittedDetector:
    """Fit one detector; deterministic given (spec, train, params['seed'])."""
    if train.has_missing():
        raise ContractError("training data contains NaNs; impute first")
    if spec.kind.startswith(USER_PREFIX):
        return UserDetector.fit(spec, train)
    if spec.kind not in _BUILTIN_KINDS:
        raise RegistryError(f"unknown detector kind {spec.kind!r}")
    return _BUILTIN_KINDS[spec.kind](spec, train)


def score_detector(state: FittedDetector, ts: TimeSeriesSet) -> np.ndarray:
    """Score a segment and enforce the output contract (finite, >= 0, length T)."""
    if ts.has_missing():
        raise ContractError("scored data contains NaNs; impute first")
    state.check_width(ts.n_metrics)
    scores = state.score(ts)
    return validate_scores(state.kind, scores, ts.length)


def validate_scores(kind: str, scores: np.ndarray, length: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (length,):
        raise ContractError(f"{kind}: scores shape {scores.shape}, expected ({length},)")
    if not np.isfinite(scores).all():
        raise ContractError(f"{kind}: non-finite score emitted")
    if (scores < 0).any():
        raise ContractError(f"{kind}: negative score emitted")
    return scores


def detector_from_state(state: Mapping[str, Any]) -> FittedDetector:
    kind = str(state.get("kind", ""))
    if kind.startswith(USER_PREFIX):
        return UserDetector.from_state(state)
    if kind not in _BUILTIN_CLASSES:
        raise RegistryError(f"unknown detector kind {kind!r}")
    return _BUILTIN_CLASSES[kind].from_state(state)


def lower_median(a: np.ndarray) -> float:
    """Median taking the lower of the two middle values for even lengths."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise ShapeError("median of empty array")
    return float(np.sort(a, kind="stable")[(a.size - 1) // 2])


def mad_scale(a: np.ndarray) -> float:
    """1.4826 * median absolute deviation, the robust sigma estimate."""
    med = lower_median(a)
    return 1.4826 * lower_median(np.abs(a - med))
