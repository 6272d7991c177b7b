import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ymir.data import LabelSeries, TimeSeriesSet


def make_ts(values, spacing: int = 60, names=None) -> TimeSeriesSet:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and values.shape[1] > 4:
        values = values.T
    T, n = values.shape
    if names is None:
        names = tuple(f"m{i}" for i in range(n))
    return TimeSeriesSet(np.arange(T, dtype=np.int64) * spacing, values, names)


def make_labels(ts: TimeSeriesSet, labels, mask=None) -> LabelSeries:
    labels = np.asarray(labels, dtype=np.int8)
    if mask is None:
        mask = np.ones(ts.length, dtype=bool)
    return LabelSeries(ts.timestamps.copy(), labels, np.asarray(mask, dtype=bool))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
