"""Dual attention-encoder + 1-D convolution classifier, implemented directly
on numpy with hand-derived gradients.

Two identical single-head encoders embed the raw metric window and the
detector feature window; their outputs are concatenated along features,
compressed by a kernel-3 convolution over time, mean-pooled, and mapped to
a probability.  The binary cross-entropy is computed from the logit via
softplus so the analytic gradient (sigmoid(logit) - target) matches the
loss value exactly, which is what the finite-difference checks verify.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import NumericError, ShapeError

LN_EPS = 1e-5
ENCODERS = ("raw", "feat")


def classifier_param_spec(n: int, k: int, d: int, c: int) -> list[tuple[str, tuple[int, ...]]]:
    """Every parameter tensor, in the declared (serialization) order."""
    spec: list[tuple[str, tuple[int, ...]]] = []
    for enc, m in (("raw", n), ("feat", k)):
        spec += [
            (f"{enc}_proj_w", (m, d)),
            (f"{enc}_proj_b", (d,)),
            (f"{enc}_wq", (d, d)),
            (f"{enc}_wk", (d, d)),
            (f"{enc}_wv", (d, d)),
            (f"{enc}_wo", (d, d)),
            (f"{enc}_ff_w1", (d, 2 * d)),
            (f"{enc}_ff_b1", (2 * d,)),
            (f"{enc}_ff_w2", (2 * d, d)),
            (f"{enc}_ff_b2", (d,)),
            (f"{enc}_ln1_g", (d,)),
            (f"{enc}_ln1_b", (d,)),
            (f"{enc}_ln2_g", (d,)),
            (f"{enc}_ln2_b", (d,)),
        ]
    spec += [
        ("conv_w", (3, 2 * d, c)),
        ("conv_b", (c,)),
        ("out_w", (c,)),
        ("out_b", (1,)),
    ]
    return spec


def init_params(n: int, k: int, d: int, c: int, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in classifier_param_spec(n, k, d, c):
        tail = name.rsplit("_", 1)[-1]
        if tail.startswith("b"):
            params[name] = np.zeros(shape)
        elif tail == "g":
            params[name] = np.ones(shape)
        elif name == "conv_w":
            fan_in, fan_out = 3 * 2 * d, 3 * c
            r = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-r, r, size=shape)
        elif name == "out_w":
            r = np.sqrt(6.0 / (c + 1))
            params[name] = rng.uniform(-r, r, size=shape)
        else:
            fan_in, fan_out = shape
            r = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-r, r, size=shape)
    return params


@lru_cache(maxsize=8)
def positional_encoding(w: int, d: int) -> np.ndarray:
    """Sinusoidal position embedding, shape (w, d)."""
    pos = np.arange(w)[:, None].astype(np.float64)
    i = np.arange(0, d, 2).astype(np.float64)
    angles = pos / np.power(10000.0, i / d)
    pe = np.zeros((w, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    pe.setflags(write=False)
    return pe


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _softmax_last(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _ln_forward(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mean) * inv
    return g * xhat + b, (xhat, inv)


def _ln_backward(dy: np.ndarray, g: np.ndarray, xhat: np.ndarray, inv: np.ndarray):
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    d = xhat.shape[-1]
    dx = (inv / d) * (
        d * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _encoder_forward(params: Mapping[str, np.ndarray], enc: str, x: np.ndarray):
    """One encoder block on a batch (B, w, m) -> (B, w, d) plus cache."""
    d = params[f"{enc}_wq"].shape[0]
    pe = positional_encoding(x.shape[1], d)
    h0 = x @ params[f"{enc}_proj_w"] + params[f"{enc}_proj_b"] + pe
    q = h0 @ params[f"{enc}_wq"]
    kk = h0 @ params[f"{enc}_wk"]
    v = h0 @ params[f"{enc}_wv"]
    scores = q @ kk.swapaxes(1, 2) / np.sqrt(d)
    attn = _softmax_last(scores)
    av = attn @ v
    r1 = h0 + av @ params[f"{enc}_wo"]
    l1, ln1_cache = _ln_forward(r1, params[f"{enc}_ln1_g"], params[f"{enc}_ln1_b"])
    u_pre = l1 @ params[f"{enc}_ff_w1"] + params[f"{enc}_ff_b1"]
    u = np.maximum(u_pre, 0.0)
    r2 = l1 + u @ params[f"{enc}_ff_w2"] + params[f"{enc}_ff_b2"]
    l2, ln2_cache = _ln_forward(r2, params[f"{enc}_ln2_g"], params[f"{enc}_ln2_b"])
    cache = (x, h0, q, kk, v, attn, av, ln1_cache, l1, u_pre, u, ln2_cache)
    return l2, cache


def _encoder_backward(params: Mapping[str, np.ndarray], enc: str, dl2: np.ndarray,
                      cache, grads: dict[str, np.ndarray]) -> None:
    x, h0, q, kk, v, attn, av, ln1_cache, l1, u_pre, u, ln2_cache = cache
    d = params[f"{enc}_wq"].shape[0]

    dr2, dg2, db2 = _ln_backward(dl2, params[f"{enc}_ln2_g"], *ln2_cache)
    grads[f"{enc}_ln2_g"] = dg2
    grads[f"{enc}_ln2_b"] = db2

    du = dr2 @ params[f"{enc}_ff_w2"].T
    du_pre = du * (u_pre > 0.0)
    grads[f"{enc}_ff_w2"] = np.einsum("bwh,bwd->hd", u, dr2)
    grads[f"{enc}_ff_b2"] = dr2.sum(axis=(0, 1))
    grads[f"{enc}_ff_w1"] = np.einsum("bwd,bwh->dh", l1, du_pre)
    grads[f"{enc}_ff_b1"] = du_pre.sum(axis=(0, 1))
    dl1 = dr2 + du_pre @ params[f"{enc}_ff_w1"].T

    dr1, dg1, db1 = _ln_backward(dl1, params[f"{enc}_ln1_g"], *ln1_cache)
    grads[f"{enc}_ln1_g"] = dg1
    grads[f"{enc}_ln1_b"] = db1

    dh0 = dr1.copy()
    dattn_out = dr1
    grads[f"{enc}_wo"] = np.einsum("bwd,bwe->de", av, dattn_out)
    dav = dattn_out @ params[f"{enc}_wo"].T
    dattn = dav @ v.swapaxes(1, 2)
    dv = attn.swapaxes(1, 2) @ dav
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dq = dscores @ kk / np.sqrt(d)
    dk = dscores.swapaxes(1, 2) @ q / np.sqrt(d)
    grads[f"{enc}_wq"] = np.einsum("bwd,bwe->de", h0, dq)
    grads[f"{enc}_wk"] = np.einsum("bwd,bwe->de", h0, dk)
    grads[f"{enc}_wv"] = np.einsum("bwd,bwe->de", h0, dv)
    dh0 += dq @ params[f"{enc}_wq"].T
    dh0 += dk @ params[f"{enc}_wk"].T
    dh0 += dv @ params[f"{enc}_wv"].T

    grads[f"{enc}_proj_w"] = np.einsum("bwm,bwd->md", x, dh0)
    grads[f"{enc}_proj_b"] = dh0.sum(axis=(0, 1))


def forward_batch(params: Mapping[str, np.ndarray], X: np.ndarray, S: np.ndarray):
    """Probabilities for a batch of (window, feature-window) pairs.

    Returns (probabilities, logits, cache).
    """
    if X.ndim != 3 or S.ndim != 3 or X.shape[:2] != S.shape[:2]:
        raise ShapeError("X and S must be (B, w, n) and (B, w, k)")
    l2_raw, cache_raw = _encoder_forward(params, "raw", X)
    l2_feat, cache_feat = _encoder_forward(params, "feat", S)
    concat = np.concatenate([l2_raw, l2_feat], axis=-1)

    b, w, _ = concat.shape
    c = params["conv_b"].shape[0]
    padded = np.pad(concat, ((0, 0), (1, 1), (0, 0)))
    y_pre = np.empty((b, w, c))
    y_pre[:] = params["conv_b"]
    for j in range(3):
        y_pre += padded[:, j : j + w, :] @ params["conv_w"][j]
    y = np.maximum(y_pre, 0.0)
    pooled = y.mean(axis=1)
    logits = pooled @ params["out_w"] + params["out_b"][0]
    probs = _sigmoid(logits)
    if not np.isfinite(probs).all():
        raise NumericError("classifier forward produced non-finite values")
    cache = (cache_raw, cache_feat, padded, y_pre, pooled)
    return probs, logits, cache


def backward_batch(params: Mapping[str, np.ndarray], dlogits: np.ndarray, cache):
    """Gradients of a scalar loss with given d(loss)/d(logit) per sample."""
    cache_raw, cache_feat, padded, y_pre, pooled = cache
    b, wpad, twod = padded.shape
    w = wpad - 2
    d = twod // 2

    grads: dict[str, np.ndarray] = {}
    grads["out_w"] = pooled.T @ dlogits
    grads["out_b"] = np.array([dlogits.sum()])
    dpooled = dlogits[:, None] * params["out_w"][None, :]
    dy_pre = np.where(y_pre > 0.0, dpooled[:, None, :] / w, 0.0)
    grads["conv_b"] = dy_pre.sum(axis=(0, 1))
    grads["conv_w"] = np.empty_like(params["conv_w"])
    dpadded = np.zeros_like(padded)
    for j in range(3):
        grads["conv_w"][j] = np.einsum("bwi,bwo->io", padded[:, j : j + w, :], dy_pre)
        dpadded[:, j : j + w, :] += dy_pre @ params["conv_w"][j].T
    dconcat = dpadded[:, 1 : 1 + w, :]

    _encoder_backward(params, "raw", dconcat[..., :d], cache_raw, grads)
    _encoder_backward(params, "feat", dconcat[..., d:], cache_feat, grads)
    return grads


def bce_loss_from_logits(logits: np.ndarray, targets: np.ndarray,
                         sample_weights: np.ndarray | None = None):
    """Weighted-mean binary cross-entropy and its logit gradient.

    Computed as softplus(logit) - target*logit, so value and gradient are an
    exact analytic pair.
    """
    if sample_weights is None:
        sample_weights = np.ones_like(logits)
    total = sample_weights.sum()
    loss = float((sample_weights * (_softplus(logits) - targets * logits)).sum() / total)
    dlogits = sample_weights * (_sigmoid(logits) - targets) / total
    return loss, dlogits


def classifier_loss_and_grads(params: Mapping[str, np.ndarray], X: np.ndarray,
                              S: np.ndarray, y: np.ndarray,
                              sample_weights: np.ndarray | None = None):
    """Scalar BCE over a batch plus gradients for every parameter tensor."""
    probs, logits, cache = forward_batch(params, X, S)
    loss, dlogits = bce_loss_from_logits(logits, y, sample_weights)
    grads = backward_batch(params, dlogits, cache)
    return loss, grads


@dataclass
class ClassifierModel:
    """Fitted classifier: hyperparameters, input standardization, parameters."""

    n_metrics: int
    n_features: int
    window: int
    d_model: int
    conv_channels: int
    seed: int
    x_mean: np.ndarray
    x_std: np.ndarray
    model_ids: tuple[str, ...]
    params: dict[str, np.ndarray]

    def forward(self, X: np.ndarray, S: np.ndarray) -> float:
        """Probability for a single standardized sample (w, n), (w, k)."""
        X = np.asarray(X, dtype=np.float64)
        S = np.asarray(S, dtype=np.float64)
        if X.shape != (self.window, self.n_metrics):
            raise ShapeError(f"X shape {X.shape}, expected ({self.window}, {self.n_metrics})")
        if S.shape != (self.window, self.n_features):
            raise ShapeError(f"S shape {S.shape}, expected ({self.window}, {self.n_features})")
        probs, _, _ = forward_batch(self.params, X[None], S[None])
        return float(probs[0])

    def window_probability(self, x_raw: np.ndarray, s_win: np.ndarray) -> float:
        """Probability for a raw (unstandardized) window; applies train stats."""
        return self.forward((x_raw - self.x_mean) / self.x_std, s_win)

    def to_dict(self) -> dict:
        spec = classifier_param_spec(
            self.n_metrics, self.n_features, self.d_model, self.conv_channels
        )
        return {
            "hyper": {
                "n_metrics": self.n_metrics,
                "n_features": self.n_features,
                "window": self.window,
                "d_model": self.d_model,
                "conv_channels": self.conv_channels,
                "seed": self.seed,
            },
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "model_ids": list(self.model_ids),
            "params": {name: self.params[name].tolist() for name, _ in spec},
        }

    @staticmethod
    def from_dict(d: Mapping) -> "ClassifierModel":
        hyper = d["hyper"]
        params = {name: np.array(values, dtype=np.float64) for name, values in d["params"].items()}
        spec = classifier_param_spec(
            hyper["n_metrics"], hyper["n_features"], hyper["d_model"], hyper["conv_channels"]
        )
        for name, shape in spec:
            if params[name].shape != shape:
                raise ShapeError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
        return ClassifierModel(
            n_metrics=int(hyper["n_metrics"]),
            n_features=int(hyper["n_features"]),
            window=int(hyper["window"]),
            d_model=int(hyper["d_model"]),
            conv_channels=int(hyper["conv_channels"]),
            seed=int(hyper["seed"]),
            x_mean=np.array(d["x_mean"], dtype=np.float64),
            x_std=np.array(d["x_std"], dtype=np.float64),
            model_ids=tuple(d["model_ids"]),
            params=params,
        )
