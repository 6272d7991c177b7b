"""Pseudo-labels from the unsupervised result, fusion with user feedback,
and proportion-adjusted label smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabelSeries
from .ensemble import UnsupervisedResult
from .errors import ParameterError, ShapeError

SOURCE_PSEUDO = 0
SOURCE_USER = 1


@dataclass(frozen=True)
class FusedLabels:
    """Pseudo labels overridden by user labels, plus smoothed training targets.

    ``source`` is 0 where a label is pseudo and 1 where a human provided it;
    ``rho`` is the human-labeled proportion and drives the smoothing amount.
    """

    hard: np.ndarray
    source: np.ndarray
    rho: float
    targets: np.ndarray

    def __post_init__(self):
        hard = np.asarray(self.hard, dtype=np.int8)
        source = np.asarray(self.source, dtype=np.int8)
        targets = np.asarray(self.targets, dtype=np.float64)
        if not (hard.shape == source.shape == targets.shape) or hard.ndim != 1:
            raise ShapeError("hard, source, and targets must share one length")
        object.__setattr__(self, "hard", hard)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "targets", targets)


def make_pseudo_labels(result: UnsupervisedResult, th: float, length: int) -> np.ndarray:
    """1 where a flagged point's confidence exceeds ``th``, else 0."""
    if not 0.0 < th <= 1.0:
        raise ParameterError("confidence threshold must lie in (0, 1]")
    labels = np.zeros(length, dtype=np.int8)
    for t in result.flagged:
        if result.confidence[t] > th:
            labels[t] = 1
    return labels


def fuse_labels(pseudo: np.ndarray, user: LabelSeries,
                epsilon_max: float = 0.1) -> FusedLabels:
    """Override pseudo labels with user labels wherever the mask is true."""
    pseudo = np.asarray(pseudo, dtype=np.int8)
    if pseudo.shape != (user.length,):
        raise ShapeError(
            f"pseudo labels length {pseudo.shape[0]} != label series length {user.length}"
        )
    hard = pseudo.copy()
    hard[user.mask] = user.labels[user.mask]
    source = np.where(user.mask, SOURCE_USER, SOURCE_PSEUDO).astype(np.int8)
    rho = float(user.mask.mean())
    targets = _smooth(hard, rho, epsilon_max)
    return FusedLabels(hard, source, rho, targets)


def smooth_targets(fused: FusedLabels, epsilon_max: float) -> np.ndarray:
    """Label smoothing that fades out as the user-label proportion grows:
    epsilon = epsilon_max * (1 - rho), target = hard*(1-eps) + eps/2."""
    return _smooth(fused.hard, fused.rho, epsilon_max)


def _smooth(hard: np.ndarray, rho: float, epsilon_max: float) -> np.ndarray:
    if not 0.0 <= epsilon_max < 0.5:
        raise ParameterError("epsilon_max must lie in [0, 0.5)")
    eps = epsilon_max * (1.0 - rho)
    return hard.astype(np.float64) * (1.0 - eps) + eps / 2.0
