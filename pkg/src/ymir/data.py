"""Time-series containers, CSV ingestion, imputation, and windowing.

A :class:`TimeSeriesSet` is the canonical input everywhere: ``n`` aligned
metric series of equal length on a uniform integer-epoch grid.  Arrays are
frozen after validation so instances can be shared freely across workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DataError,
    ParseError,
    SizeError,
    StructureError,
)

NAN_TOKENS = {"nan", "NaN", "NAN", ""}


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesSet:
    """``n`` metric series over ``T`` uniformly spaced integer timestamps.

    ``values`` has shape (T, n).  NaN cells are permitted as missing-value
    markers until :func:`impute_missing` runs; infinities never are.
    """

    timestamps: np.ndarray
    values: np.ndarray
    metric_names: tuple[str, ...]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise StructureError("values must be a T x n matrix")
        if ts.ndim != 1 or ts.shape[0] != vals.shape[0]:
            raise StructureError("timestamps and values disagree on length")
        if ts.shape[0] < 1:
            raise StructureError("empty series")
        names = tuple(str(m) for m in self.metric_names)
        if len(names) != vals.shape[1]:
            raise StructureError("metric_names does not match value columns")
        if len(set(names)) != len(names) or any(not m for m in names):
            raise StructureError("metric names must be unique and nonempty")
        if ts.shape[0] >= 2:
            steps = np.diff(ts)
            if np.any(steps <= 0):
                raise StructureError("timestamps must be strictly increasing")
            if np.any(steps != steps[0]):
                raise StructureError("non-uniform spacing")
        if np.isinf(vals).any():
            raise StructureError("infinite values are not allowed")
        object.__setattr__(self, "timestamps", _freeze(ts))
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(self, "metric_names", names)

    @property
    def length(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def n_metrics(self) -> int:
        return int(self.values.shape[1])

    @property
    def spacing(self) -> int | None:
        """Grid step in seconds, or None for a single-point series."""
        if self.length < 2:
            return None
        return int(self.timestamps[1] - self.timestamps[0])

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def slice(self, start: int, stop: int) -> "TimeSeriesSet":
        return TimeSeriesSet(
            self.timestamps[start:stop].copy(),
            self.values[start:stop].copy(),
            self.metric_names,
        )


@dataclass(frozen=True)
class LabelSeries:
    """Per-timestamp 0/1 anomaly labels with a mask marking human-labeled points."""

    timestamps: np.ndarray
    labels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int8)
        mask = np.asarray(self.mask, dtype=bool)
        if not (ts.shape == labels.shape == mask.shape) or ts.ndim != 1:
            raise StructureError("timestamps, labels, and mask must share one length")
        if not np.isin(labels, (0, 1)).all():
            raise ParseError("labels must be 0 or 1")
        object.__setattr__(self, "timestamps", _freeze(ts))
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "mask", _freeze(mask))

    @property
    def length(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def fully_labeled(self) -> bool:
        return bool(self.mask.all())

    @property
    def rho(self) -> float:
        """Proportion of human-labeled points."""
        return float(self.mask.mean())

    def slice(self, start: int, stop: int) -> "LabelSeries":
        return LabelSeries(
            self.timestamps[start:stop].copy(),
            self.labels[start:stop].copy(),
            self.mask[start:stop].copy(),
        )


@dataclass(frozen=True)
class WindowView:
    """Half-open index window [start, start+length) classifying ``center``."""

    start: int
    length: int
    center: int = field(default=-1)

    def __post_init__(self):
        center = self.center
        if center == -1:
            center = self.start + self.length // 2
            object.__setattr__(self, "center", center)
        if self.start < 0 or self.length < 1:
            raise SizeError("window start/length out of range")
        if not (self.start <= center < self.start + self.length):
            raise SizeError("window center outside window")

    @property
    def stop(self) -> int:
        return self.start + self.length


def load_timeseries_csv(path) -> TimeSeriesSet:
    """Load `timestamp,<m1>,...,<mn>` CSV rows into a validated TimeSeriesSet.

    Rows are sorted by timestamp before validation; duplicate timestamps and
    non-uniform spacing are rejected.  The `NaN` token (or an empty cell)
    marks a missing value.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StructureError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "timestamp":
            raise ParseError(f"{path}: header must be 'timestamp,<metric>...'")
        names = tuple(h.strip() for h in header[1:])
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names) + 1:
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(names) + 1} cells, got {len(row)}"
                )
            try:
                ts = int(row[0])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad timestamp {row[0]!r}") from None
            cells = []
            for cell in row[1:]:
                token = cell.strip()
                if token in NAN_TOKENS:
                    cells.append(math.nan)
                    continue
                try:
                    cells.append(float(token))
                except ValueError:
                    raise ParseError(f"{path}: line {lineno}: bad value {cell!r}") from None
            rows.append((ts, cells))
    if not rows:
        raise StructureError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    timestamps = np.array([r[0] for r in rows], dtype=np.int64)
    if np.any(np.diff(timestamps) == 0):
        raise StructureError(f"{path}: duplicate timestamps")
    values = np.array([r[1] for r in rows], dtype=np.float64)
    return TimeSeriesSet(timestamps, values, names)


def save_timeseries_csv(path, ts: TimeSeriesSet) -> None:
    """Inverse of :func:`load_timeseries_csv`; floats use shortest round-trip repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *ts.metric_names])
        for i in range(ts.length):
            writer.writerow(
                [int(ts.timestamps[i])] + [repr(float(v)) for v in ts.values[i]]
            )


def load_labels_csv(path, ts: TimeSeriesSet) -> LabelSeries:
    """Load sparse `timestamp,label` rows aligned against ``ts``.

    The mask is true exactly at listed timestamps; a timestamp absent from
    ``ts`` is an alignment error.
    """
    index = {int(t): i for i, t in enumerate(ts.timestamps)}
    labels = np.zeros(ts.length, dtype=np.int8)
    mask = np.zeros(ts.length, dtype=bool)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StructureError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["timestamp", "label"]:
            raise ParseError(f"{path}: header must be 'timestamp,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 2 cells")
            try:
                t = int(row[0])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad timestamp {row[0]!r}") from None
            if row[1].strip() not in ("0", "1"):
                raise ParseError(f"{path}: line {lineno}: label must be 0 or 1")
            if t not in index:
                raise AlignmentError(f"{path}: line {lineno}: timestamp {t} not in data")
            i = index[t]
            if mask[i]:
                raise ParseError(f"{path}: line {lineno}: duplicate label for timestamp {t}")
            labels[i] = int(row[1])
            mask[i] = True
    return LabelSeries(ts.timestamps.copy(), labels, mask)


def save_labels_csv(path, labels: LabelSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "label"])
        for i in range(labels.length):
            if labels.mask[i]:
                writer.writerow([int(labels.timestamps[i]), int(labels.labels[i])])


def full_labels(ts: TimeSeriesSet, labels: Sequence[int]) -> LabelSeries:
    """Wrap a dense 0/1 vector as a fully masked LabelSeries over ``ts``."""
    arr = np.asarray(labels, dtype=np.int8)
    if arr.shape != (ts.length,):
        raise StructureError("label vector length must equal series length")
    return LabelSeries(ts.timestamps.copy(), arr, np.ones(ts.length, dtype=bool))


def impute_missing(ts: TimeSeriesSet) -> TimeSeriesSet:
    """Replace NaN cells by linear interpolation between finite neighbors.

    Leading/trailing NaNs take the nearest finite value.  Idempotent; finite
    cells are never touched.  A metric with no finite value at all is a data
    error.
    """
    values = np.array(ts.values, dtype=np.float64)
    for j, name in enumerate(ts.metric_names):
        col = values[:, j]
        finite = np.isfinite(col)
        if finite.all():
            continue
        if not finite.any():
            raise DataError(f"metric {name!r} has no finite values")
        idx = np.arange(col.shape[0])
        col[~finite] = np.interp(idx[~finite], idx[finite], col[finite])
    return TimeSeriesSet(ts.timestamps.copy(), values, ts.metric_names)


def sliding_windows(length: int, w: int, stride: int = 1) -> list[WindowView]:
    """Windows at starts 0, stride, 2*stride, ... with start + w <= length."""
    if w < 1 or w > length:
        raise SizeError(f"window size {w} exceeds series length {length}")
    if stride < 1:
        raise SizeError("stride must be >= 1")
    return [WindowView(start, w) for start in range(0, length - w + 1, stride)]
