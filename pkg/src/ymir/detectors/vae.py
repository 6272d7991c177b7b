"""Windowed variational autoencoder for change-point style anomalies.

A window of ``w_v`` consecutive points is flattened, standardized by
training statistics, and pushed through a one-hidden-layer encoder/decoder
pair.  Training minimizes reconstruction error plus the Gaussian KL term by
plain seeded SGD; gradients are hand-derived and validated against finite
differences in the test suite.  Scoring is deterministic (z = mu) and a
timestamp's score is the mean reconstruction error of every window that
covers it.
"""

from __future__ import annotations

import numpy as np

from ..data import TimeSeriesSet
from ..errors import FitError, NumericError, ParameterError, SizeError
from .base import EPS, DetectorSpec, FittedDetector, SeriesView, builtin_kind
from .statistical import _check_params

PARAM_NAMES = ("We1", "be1", "Wmu", "bmu", "Wlv", "blv", "Wd1", "bd1", "Wd2", "bd2")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...]) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


def vae_init(input_dim: int, hidden: int, latent: int, rng: np.random.Generator) -> dict:
    return {
        "We1": glorot_uniform(rng, input_dim, hidden, (input_dim, hidden)),
        "be1": np.zeros(hidden),
        "Wmu": glorot_uniform(rng, hidden, latent, (hidden, latent)),
        "bmu": np.zeros(latent),
        "Wlv": glorot_uniform(rng, hidden, latent, (hidden, latent)),
        "blv": np.zeros(latent),
        "Wd1": glorot_uniform(rng, latent, hidden, (latent, hidden)),
        "bd1": np.zeros(hidden),
        "Wd2": glorot_uniform(rng, hidden, input_dim, (hidden, input_dim)),
        "bd2": np.zeros(input_dim),
    }


def vae_loss(params: dict, X: np.ndarray, eps_noise: np.ndarray) -> float:
    loss, _ = _forward(params, X, eps_noise)
    return loss


def _forward(params: dict, X: np.ndarray, eps_noise: np.ndarray):
    h1a = X @ params["We1"] + params["be1"]
    h1 = np.tanh(h1a)
    mu = h1 @ params["Wmu"] + params["bmu"]
    lv = h1 @ params["Wlv"] + params["blv"]
    std = np.exp(0.5 * lv)
    z = mu + std * eps_noise
    h2a = z @ params["Wd1"] + params["bd1"]
    h2 = np.tanh(h2a)
    xr = h2 @ params["Wd2"] + params["bd2"]
    recon = np.mean(np.square(xr - X))
    kl = np.mean(-0.5 * np.sum(1.0 + lv - np.square(mu) - np.exp(lv), axis=1))
    cache = (X, eps_noise, h1, mu, lv, std, z, h2, xr)
    return float(recon + kl), cache


def vae_loss_and_grads(params: dict, X: np.ndarray, eps_noise: np.ndarray):
    """Loss plus analytic gradients for every parameter tensor."""
    loss, cache = _forward(params, X, eps_noise)
    X, eps, h1, mu, lv, std, z, h2, xr = cache
    B, D = X.shape

    dxr = 2.0 * (xr - X) / (B * D)
    g = {
        "Wd2": h2.T @ dxr,
        "bd2": dxr.sum(axis=0),
    }
    dh2 = dxr @ params["Wd2"].T
    dh2a = dh2 * (1.0 - h2 * h2)
    g["Wd1"] = z.T @ dh2a
    g["bd1"] = dh2a.sum(axis=0)
    dz = dh2a @ params["Wd1"].T

    dmu = dz + mu / B
    dlv = dz * eps * 0.5 * std + 0.5 * (np.exp(lv) - 1.0) / B
    g["Wmu"] = h1.T @ dmu
    g["bmu"] = dmu.sum(axis=0)
    g["Wlv"] = h1.T @ dlv
    g["blv"] = dlv.sum(axis=0)

    dh1 = dmu @ params["Wmu"].T + dlv @ params["Wlv"].T
    dh1a = dh1 * (1.0 - h1 * h1)
    g["We1"] = X.T @ dh1a
    g["be1"] = dh1a.sum(axis=0)
    return loss, g


def reconstruction_error(params: dict, x: np.ndarray) -> float:
    """Deterministic (z = mu) mean squared reconstruction error of one window."""
    h1 = np.tanh(x @ params["We1"] + params["be1"])
    mu = h1 @ params["Wmu"] + params["bmu"]
    h2 = np.tanh(mu @ params["Wd1"] + params["bd1"])
    xr = h2 @ params["Wd2"] + params["bd2"]
    return float(np.mean(np.square(xr - x)))


class VaeState:
    def __init__(self, params: dict, mean: np.ndarray, std: np.ndarray,
                 w_v: int, hidden: int, latent: int, losses: list[float]):
        self.params = params
        self.mean = mean
        self.std = std
        self.w_v = w_v
        self.hidden = hidden
        self.latent = latent
        self.losses = losses


def vae_fit(train: TimeSeriesSet, w_v: int = 16, hidden: int = 32, latent: int = 4,
            epochs: int = 50, seed: int = 0, learning_rate: float = 1e-3,
            batch_size: int = 32) -> VaeState:
    """Train the windowed VAE on all length-``w_v`` windows of ``train``."""
    if w_v < 2:
        raise ParameterError("vae: window must be >= 2")
    if w_v > train.length:
        raise SizeError(f"vae: window {w_v} exceeds series length {train.length}")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    std = np.where(std > 0, std, EPS)
    standardized = (train.values - mean) / std
    n_windows = train.length - w_v + 1
    D = w_v * train.n_metrics
    windows = np.empty((n_windows, D))
    for s in range(n_windows):
        windows[s] = standardized[s : s + w_v].reshape(-1)

    rng = np.random.default_rng(seed)
    params = vae_init(D, hidden, latent, rng)
    losses = []
    for epoch in range(epochs):
        perm = rng.permutation(n_windows)
        epoch_loss = 0.0
        for start in range(0, n_windows, batch_size):
            batch = windows[perm[start : start + batch_size]]
            noise = rng.standard_normal(size=(batch.shape[0], latent))
            loss, grads = vae_loss_and_grads(params, batch, noise)
            if not np.isfinite(loss):
                raise NumericError(f"vae: loss diverged at epoch {epoch}")
            for name in PARAM_NAMES:
                params[name] = params[name] - learning_rate * grads[name]
            epoch_loss += loss * batch.shape[0]
        losses.append(epoch_loss / n_windows)
    return VaeState(params, mean, std, w_v, hidden, latent, losses)


def vae_score(state: VaeState, ts: TimeSeriesSet) -> np.ndarray:
    """Per-timestamp mean reconstruction error over all covering windows."""
    det = VaeDetector(state, len(state.mean), 0)
    return det.score_range(SeriesView.of(ts), 0, ts.length)


@builtin_kind("vae_recon")
class VaeDetector(FittedDetector):
    def __init__(self, state: VaeState, n_metrics: int, train_len: int):
        super().__init__(n_metrics, train_len)
        self.vae = state
        self.back = state.w_v - 1
        self.fwd = state.w_v - 1

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "VaeDetector":
        params = _check_params(
            spec, {"w_v", "hidden", "latent", "epochs", "seed", "learning_rate", "batch_size"}
        )
        state = vae_fit(
            train,
            w_v=int(params.get("w_v", 16)),
            hidden=int(params.get("hidden", 32)),
            latent=int(params.get("latent", 4)),
            epochs=int(params.get("epochs", 50)),
            seed=int(params.get("seed", 0)),
            learning_rate=float(params.get("learning_rate", 1e-3)),
            batch_size=int(params.get("batch_size", 32)),
        )
        return cls(state, train.n_metrics, train.length)

    def _window_error(self, view: SeriesView, s: int) -> float:
        raw = view.rows(s, s + self.vae.w_v)
        flat = ((raw - self.vae.mean) / self.vae.std).reshape(-1)
        return reconstruction_error(self.vae.params, flat)

    def score_range(self, view: SeriesView, lo: int, hi: int,
                    cache: dict | None = None) -> np.ndarray:
        self.check_width(view.width)
        w_v = self.vae.w_v
        if view.end < w_v:
            raise SizeError(f"vae: window {w_v} exceeds series length {view.end}")
        # Window errors are final once the window is fully buffered, so a
        # caller-held cache is safe across calls on the same series.
        if cache is None:
            cache = {}
        out = np.empty(hi - lo)
        for t in range(lo, hi):
            first = max(0, t - w_v + 1)
            last = min(t, view.end - w_v)
            errors = np.empty(last - first + 1)
            for i, s in enumerate(range(first, last + 1)):
                if s not in cache:
                    cache[s] = self._window_error(view, s)
                errors[i] = cache[s]
            out[t - lo] = errors.mean()
        return out

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {k: v.tolist() for k, v in self.vae.params.items()},
            "mean": self.vae.mean.tolist(),
            "std": self.vae.std.tolist(),
            "w_v": self.vae.w_v,
            "hidden": self.vae.hidden,
            "latent": self.vae.latent,
            "n_metrics": self.n_metrics,
            "train_len": self.train_len,
        }

    @classmethod
    def from_state(cls, state) -> "VaeDetector":
        vae = VaeState(
            {k: np.array(v) for k, v in state["params"].items()},
            np.array(state["mean"]),
            np.array(state["std"]),
            int(state["w_v"]),
            int(state["hidden"]),
            int(state["latent"]),
            [],
        )
        return cls(vae, state["n_metrics"], state["train_len"])
