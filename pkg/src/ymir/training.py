"""Dataset construction, classifier training (SGD with momentum), the linear
reference learner, and full-series prediction.

Training is fully deterministic: parameter init, shuffling, and batching all
derive from one seeded generator, so identical configs reproduce identical
parameters bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .classifier import (
    ClassifierModel,
    _sigmoid,
    backward_batch,
    bce_loss_from_logits,
    classifier_param_spec,
    forward_batch,
    init_params,
)
from .data import TimeSeriesSet
from .detectors.base import EPS
from .errors import NumericError, ParameterError, ShapeError, SizeError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 15
    momentum: float = 0.9
    seed: int = 0
    epsilon_max: float = 0.1
    confidence_threshold: float = 0.8
    balance_positives: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ParameterError("learning rate, batch size, and epochs must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must lie in [0, 1)")
        if not 0.0 <= self.epsilon_max < 0.5:
            raise ParameterError("epsilon_max must lie in [0, 0.5)")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ParameterError("confidence threshold must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "momentum": self.momentum,
            "seed": self.seed,
            "epsilon_max": self.epsilon_max,
            "confidence_threshold": self.confidence_threshold,
            "balance_positives": self.balance_positives,
        }

    @staticmethod
    def from_dict(d: Mapping) -> "TrainConfig":
        return TrainConfig(**dict(d))


@dataclass(frozen=True)
class WindowDataset:
    """Sliding-window samples: standardized raw windows, feature windows, and
    the smoothed target at each window center."""

    X: np.ndarray
    S: np.ndarray
    y: np.ndarray
    centers: np.ndarray
    x_mean: np.ndarray = field(repr=False)
    x_std: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.X.shape[0])


def build_dataset(ts: TimeSeriesSet, features: np.ndarray, targets: np.ndarray,
                  w: int, x_mean: np.ndarray | None = None,
                  x_std: np.ndarray | None = None) -> WindowDataset:
    """One sample per window center, stride 1.

    Raw values are standardized per metric; by default the statistics come
    from ``ts`` itself (training), or pass stored training stats to rebuild
    a dataset over new data.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    T = ts.length
    if w > T:
        raise SizeError(f"window {w} exceeds series length {T}")
    if features.ndim != 2 or features.shape[0] != T:
        raise ShapeError("feature matrix must have T rows")
    if targets.shape != (T,):
        raise ShapeError("targets must have length T")
    if x_mean is None:
        x_mean = ts.values.mean(axis=0)
        x_std = ts.values.std(axis=0)
        x_std = np.where(x_std > 0, x_std, EPS)
    standardized = (ts.values - x_mean) / x_std

    first_center = w // 2
    count = T - w + 1
    centers = np.arange(first_center, first_center + count)
    X = np.empty((count, w, ts.n_metrics))
    S = np.empty((count, w, features.shape[1]))
    for i in range(count):
        X[i] = standardized[i : i + w]
        S[i] = features[i : i + w]
    return WindowDataset(X, S, targets[centers], centers, x_mean, x_std)


def _sample_weights(y: np.ndarray, balance: bool) -> np.ndarray | None:
    if not balance:
        return None
    pos = y > 0.5
    n_pos = int(pos.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    weights = np.ones_like(y)
    weights[pos] = n_neg / n_pos
    return weights


def train_classifier(dataset: WindowDataset, cfg: TrainConfig, d_model: int = 16,
                     conv_channels: int = 8,
                     model_ids: tuple[str, ...] = ()) -> tuple[ClassifierModel, list[float]]:
    """Mini-batch SGD with momentum against the smoothed targets.

    Returns the fitted model and the recorded mean loss per epoch.
    """
    if len(dataset) == 0:
        raise ParameterError("dataset is empty")
    n = dataset.X.shape[2]
    k = dataset.S.shape[2]
    w = dataset.X.shape[1]
    rng = np.random.default_rng(cfg.seed)
    params = init_params(n, k, d_model, conv_channels, cfg.seed)
    velocity = {name: np.zeros_like(arr) for name, arr in params.items()}
    names = [name for name, _ in classifier_param_spec(n, k, d_model, conv_channels)]

    losses: list[float] = []
    count = len(dataset)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(count)
        epoch_loss = 0.0
        for start in range(0, count, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            Xb, Sb, yb = dataset.X[idx], dataset.S[idx], dataset.y[idx]
            sw = _sample_weights(yb, cfg.balance_positives)
            probs, logits, cache = forward_batch(params, Xb, Sb)
            loss, dlogits = bce_loss_from_logits(logits, yb, sw)
            if not np.isfinite(loss):
                raise NumericError(f"classifier training diverged at epoch {epoch}")
            grads = backward_batch(params, dlogits, cache)
            for name in names:
                velocity[name] = cfg.momentum * velocity[name] + grads[name]
                params[name] = params[name] - cfg.learning_rate * velocity[name]
            epoch_loss += loss * idx.shape[0]
        losses.append(epoch_loss / count)

    model = ClassifierModel(
        n_metrics=n,
        n_features=k,
        window=w,
        d_model=d_model,
        conv_channels=conv_channels,
        seed=cfg.seed,
        x_mean=dataset.x_mean,
        x_std=dataset.x_std,
        model_ids=tuple(model_ids),
        params=params,
    )
    return model, losses


@dataclass
class LinearBaseline:
    """Logistic regression on mean-pooled window features."""

    weights: np.ndarray
    bias: float
    x_mean: np.ndarray
    x_std: np.ndarray

    def forward(self, X: np.ndarray, S: np.ndarray) -> float:
        f = np.concatenate([np.asarray(X).mean(axis=0), np.asarray(S).mean(axis=0)])
        return float(_sigmoid(np.array([f @ self.weights + self.bias]))[0])


def linear_features(dataset: WindowDataset) -> np.ndarray:
    return np.concatenate([dataset.X.mean(axis=1), dataset.S.mean(axis=1)], axis=1)


def linear_loss_and_grads(weights: np.ndarray, bias: float, F: np.ndarray, y: np.ndarray):
    logits = F @ weights + bias
    loss, dlogits = bce_loss_from_logits(logits, y)
    return loss, F.T @ dlogits, float(dlogits.sum())


def train_linear_baseline(dataset: WindowDataset, cfg: TrainConfig,
                          iterations: int = 500) -> tuple[LinearBaseline, list[float]]:
    """Full-batch gradient descent; the fast fully-deterministic reference."""
    if len(dataset) == 0:
        raise ParameterError("dataset is empty")
    F = linear_features(dataset)
    weights = np.zeros(F.shape[1])
    bias = 0.0
    losses = []
    for it in range(iterations):
        loss, dw, db = linear_loss_and_grads(weights, bias, F, dataset.y)
        if not np.isfinite(loss):
            raise NumericError(f"baseline training diverged at iteration {it}")
        weights = weights - cfg.learning_rate * dw
        bias = bias - cfg.learning_rate * db
        losses.append(loss)
    return LinearBaseline(weights, bias, dataset.x_mean, dataset.x_std), losses


def predict_series(model: ClassifierModel, ts: TimeSeriesSet,
                   features: np.ndarray, w: int | None = None) -> np.ndarray:
    """Per-timestamp probabilities over a whole series.

    Interior timestamps are classified by the window centered on them; edge
    timestamps take the nearest interior probability.
    """
    w = model.window if w is None else w
    if w != model.window:
        raise ShapeError(f"model was trained with window {model.window}")
    features = np.asarray(features, dtype=np.float64)
    T = ts.length
    if w > T:
        raise SizeError(f"window {w} exceeds series length {T}")
    if ts.n_metrics != model.n_metrics or features.shape != (T, model.n_features):
        raise ShapeError("metric or feature count does not match the trained model")

    first_center = w // 2
    last_center = first_center + (T - w)
    out = np.empty(T)
    for center in range(first_center, last_center + 1):
        start = center - first_center
        out[center] = model.window_probability(
            ts.values[start : start + w], features[start : start + w]
        )
    out[:first_center] = out[first_center]
    out[last_center + 1 :] = out[last_center]
    return out
