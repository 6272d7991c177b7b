"""Spatial detectors scoring the n-dimensional points directly: isolation
forest (random partition trees) and local outlier factor (brute-force k-NN
density ratio on per-metric standardized coordinates).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..data import TimeSeriesSet
from ..errors import FitError, ParameterError
from .base import EPS, DetectorSpec, FittedDetector, SeriesView, builtin_kind
from .statistical import _check_params

DIST_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# isolation forest


def _harmonic(m: int) -> float:
    return float(sum(1.0 / i for i in range(1, m + 1)))


@lru_cache(maxsize=4096)
def average_path_length(m: int) -> float:
    """c(m): expected unsuccessful-search path length of a BST of m points.

    Exact harmonic numbers, so c(1) = 0 and c(2) = 1 hold exactly.
    """
    if m <= 1:
        return 0.0
    return 2.0 * _harmonic(m - 1) - 2.0 * (m - 1) / m


class _Tree:
    """One isolation tree, stored as flat parallel arrays."""

    __slots__ = ("feature", "threshold", "left", "right", "size")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.size: list[int] = []

    def _add(self, feature, threshold, size) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(size)
        return len(self.feature) - 1

    def grow(self, X: np.ndarray, idx: np.ndarray, depth: int, limit: int,
             rng: np.random.Generator) -> int:
        size = idx.shape[0]
        if depth >= limit or size <= 1:
            return self._add(-1, 0.0, size)
        q = int(rng.integers(0, X.shape[1]))
        col = X[idx, q]
        lo, hi = float(col.min()), float(col.max())
        if lo == hi:
            return self._add(-1, 0.0, size)
        split = float(rng.uniform(lo, hi))
        mask = col < split
        left_idx = idx[mask]
        right_idx = idx[~mask]
        if left_idx.shape[0] == 0 or right_idx.shape[0] == 0:
            return self._add(-1, 0.0, size)
        node = self._add(q, split, size)
        self.left[node] = self.grow(X, left_idx, depth + 1, limit, rng)
        self.right[node] = self.grow(X, right_idx, depth + 1, limit, rng)
        return node

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        """Path length h(x) for every row, including the truncation credit."""
        out = np.empty(X.shape[0])
        self._descend(X, np.arange(X.shape[0]), 0, 0, out)
        return out

    def path_length_row(self, row: np.ndarray) -> float:
        """Scalar descent for one point; bit-identical to the masked descent
        (same comparisons, same depth + c(leaf) float arithmetic)."""
        node = 0
        depth = 0
        while self.feature[node] >= 0:
            if row[self.feature[node]] < self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
            depth += 1
        return depth + average_path_length(self.size[node])

    def _descend(self, X, rows, node, depth, out):
        if self.feature[node] < 0:
            out[rows] = depth + average_path_length(self.size[node])
            return
        mask = X[rows, self.feature[node]] < self.threshold[node]
        left_rows = rows[mask]
        right_rows = rows[~mask]
        if left_rows.shape[0]:
            self._descend(X, left_rows, self.left[node], depth + 1, out)
        if right_rows.shape[0]:
            self._descend(X, right_rows, self.right[node], depth + 1, out)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "size": self.size}

    @classmethod
    def from_dict(cls, d) -> "_Tree":
        tree = cls()
        tree.feature = [int(v) for v in d["feature"]]
        tree.threshold = [float(v) for v in d["threshold"]]
        tree.left = [int(v) for v in d["left"]]
        tree.right = [int(v) for v in d["right"]]
        tree.size = [int(v) for v in d["size"]]
        return tree


class IsolationForestState:
    def __init__(self, trees: list[_Tree], psi: int, n_features: int):
        self.trees = trees
        self.psi = psi
        self.n_features = n_features
        self._c_psi = average_path_length(psi)


def isolation_forest_fit(points: np.ndarray, trees: int = 100,
                         subsample: int | None = None, seed: int = 0) -> IsolationForestState:
    """Grow an isolation forest on a T x n matrix.

    Each tree takes a uniform subsample of ``subsample`` points (default
    min(256, T), drawn without replacement) and splits on a uniformly random
    attribute at a uniformly random value within the node's range, down to
    depth ceil(log2(subsample)).
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError("isolation forest expects a 2-D matrix")
    T = X.shape[0]
    psi = min(256, T) if subsample is None else int(subsample)
    if psi < 2:
        raise ParameterError("isolation forest: subsample must be >= 2")
    if psi > T:
        raise FitError(f"isolation forest: subsample {psi} exceeds {T} training points")
    if trees < 1:
        raise ParameterError("isolation forest: needs at least one tree")
    rng = np.random.default_rng(seed)
    limit = int(np.ceil(np.log2(psi)))
    grown = []
    for _ in range(trees):
        idx = rng.choice(T, size=psi, replace=False)
        tree = _Tree()
        tree.grow(X, idx, 0, limit, rng)
        grown.append(tree)
    return IsolationForestState(grown, psi, X.shape[1])


def isolation_forest_score(state: IsolationForestState, points: np.ndarray) -> np.ndarray:
    """Anomaly score 2^(-E[h(x)] / c(psi)) in (0, 1) per point."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.n_features:
        raise ParameterError("isolation forest: feature count mismatch")
    total = np.zeros(X.shape[0])
    if X.shape[0] <= 64:
        # Per-row scalar descent; accumulation over trees stays in the same
        # order as the vectorized path, so results match bit for bit.
        for i in range(X.shape[0]):
            h = 0.0
            row = X[i]
            for tree in state.trees:
                h += tree.path_length_row(row)
            total[i] = h
    else:
        for tree in state.trees:
            total += tree.path_lengths(X)
    expected = total / len(state.trees)
    return np.power(2.0, -expected / state._c_psi)


@builtin_kind("isolation_forest")
class IsolationForestDetector(FittedDetector):
    def __init__(self, state: IsolationForestState, n_metrics: int, train_len: int):
        super().__init__(n_metrics, train_len)
        self.forest = state

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "IsolationForestDetector":
        params = _check_params(spec, {"trees", "subsample", "seed"})
        state = isolation_forest_fit(
            train.values,
            trees=int(params.get("trees", 100)),
            subsample=params.get("subsample"),
            seed=int(params.get("seed", 0)),
        )
        return cls(state, train.n_metrics, train.length)

    def score_range(self, view: SeriesView, lo: int, hi: int,
                    cache: dict | None = None) -> np.ndarray:
        self.check_width(view.width)
        return isolation_forest_score(self.forest, view.rows(lo, hi))

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "psi": self.forest.psi,
            "n_features": self.forest.n_features,
            "trees": [t.to_dict() for t in self.forest.trees],
            "n_metrics": self.n_metrics,
            "train_len": self.train_len,
        }

    @classmethod
    def from_state(cls, state) -> "IsolationForestDetector":
        forest = IsolationForestState(
            [_Tree.from_dict(t) for t in state["trees"]],
            int(state["psi"]),
            int(state["n_features"]),
        )
        return cls(forest, state["n_metrics"], state["train_len"])


# ---------------------------------------------------------------------------
# local outlier factor


class LofState:
    """Training neighborhood structure for novelty-style LOF queries."""

    def __init__(self, points_std: np.ndarray, k_dist: np.ndarray, lrd: np.ndarray,
                 mean: np.ndarray, std: np.ndarray, k: int):
        self.points_std = points_std
        self.k_dist = k_dist
        self.lrd = lrd
        self.mean = mean
        self.std = std
        self.k = k


def lof_fit(points: np.ndarray, k_neighbors: int = 20) -> LofState:
    """Precompute k-distances and local reachability densities on training
    points (per-metric standardized, Euclidean, brute force)."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError("lof expects a 2-D matrix")
    T = X.shape[0]
    k = int(k_neighbors)
    if k < 1:
        raise ParameterError("lof: k_neighbors must be >= 1")
    if T < k + 1:
        raise FitError(f"lof: needs at least k_neighbors+1 = {k + 1} training points")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, EPS)
    S = (X - mean) / std
    diff = S[:, None, :] - S[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    dist = np.maximum(dist, DIST_FLOOR)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    k_dist = dist[np.arange(T), order[:, -1]]
    reach = np.maximum(k_dist[order], dist[np.arange(T)[:, None], order])
    lrd = 1.0 / reach.mean(axis=1)
    return LofState(S, k_dist, lrd, mean, std, k)


def lof_score(state: LofState, points: np.ndarray) -> np.ndarray:
    """max(LOF - 1, 0) per query point, so inliers sit near zero."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.points_std.shape[1]:
        raise ParameterError("lof: feature count mismatch")
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = _lof_row(state, X[i])
    return out


def _lof_row(state: LofState, point: np.ndarray) -> float:
    s = (point - state.mean) / state.std
    diff = state.points_std - s
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    dist = np.maximum(dist, DIST_FLOOR)
    order = np.argsort(dist, kind="stable")[: state.k]
    reach = np.maximum(state.k_dist[order], dist[order])
    lrd_q = 1.0 / reach.mean()
    lof = state.lrd[order].mean() / lrd_q
    return max(lof - 1.0, 0.0)


@builtin_kind("lof")
class LofDetector(FittedDetector):
    def __init__(self, state: LofState, n_metrics: int, train_len: int):
        super().__init__(n_metrics, train_len)
        self.lof = state

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "LofDetector":
        params = _check_params(spec, {"k_neighbors", "seed"})
        state = lof_fit(train.values, k_neighbors=int(params.get("k_neighbors", 20)))
        return cls(state, train.n_metrics, train.length)

    def score_range(self, view: SeriesView, lo: int, hi: int,
                    cache: dict | None = None) -> np.ndarray:
        self.check_width(view.width)
        return lof_score(self.lof, view.rows(lo, hi))

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "points_std": self.lof.points_std.tolist(),
            "k_dist": self.lof.k_dist.tolist(),
            "lrd": self.lof.lrd.tolist(),
            "mean": self.lof.mean.tolist(),
            "std": self.lof.std.tolist(),
            "k": self.lof.k,
            "n_metrics": self.n_metrics,
            "train_len": self.train_len,
        }

    @classmethod
    def from_state(cls, state) -> "LofDetector":
        lof = LofState(
            np.array(state["points_std"]),
            np.array(state["k_dist"]),
            np.array(state["lrd"]),
            np.array(state["mean"]),
            np.array(state["std"]),
            int(state["k"]),
        )
        return cls(lof, state["n_metrics"], state["train_len"])
