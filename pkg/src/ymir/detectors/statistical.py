"""Statistical detectors: moving average, Chebyshev tail bound, and the two
seasonal robust-z detectors (seasonal median difference and seasonal-hybrid
residual).

All four are univariate; per-metric scores combine by pointwise maximum in
:class:`~ymir.detectors.base.UnivariateDetector`.  Medians use the lower
middle value on even counts so every output is reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..data import TimeSeriesSet
from ..errors import FitError, ParameterError
from .base import (
    EPS,
    DetectorSpec,
    SeriesView,
    UnivariateDetector,
    builtin_kind,
    lower_median,
    mad_scale,
)


def _check_params(spec: DetectorSpec, allowed: set[str]) -> dict:
    params = dict(spec.params)
    unknown = set(params) - allowed
    if unknown:
        raise ParameterError(f"{spec.kind}: unknown parameters {sorted(unknown)}")
    return params


# ---------------------------------------------------------------------------
# moving average


def _ma_row(x: np.ndarray, value: float, w: int, t: int, end: int) -> float:
    """Deviation of one point from its trailing-window statistics.

    ``x`` holds the rows the window may touch; ``t`` is the row's position
    within ``x``.  Rows before the first full window fall back to the first
    ``w`` points' statistics (or the whole series when it is shorter than w).
    """
    if t >= w:
        win = x[t - w : t]
    else:
        win = x[: min(w, end)]
    m = win.mean()
    s = win.std()
    return abs(value - m) / (s + EPS)


def moving_average_score(series: np.ndarray, w: int = 20) -> np.ndarray:
    """Trailing-window z-like deviation score of a single series."""
    if w < 2:
        raise ParameterError("moving_average: window must be >= 2")
    x = np.asarray(series, dtype=np.float64)
    out = np.empty(x.shape[0])
    for t in range(x.shape[0]):
        out[t] = _ma_row(x, x[t], w, t, x.shape[0])
    return out


@builtin_kind("moving_average")
class MovingAverageDetector(UnivariateDetector):
    def __init__(self, w: int, n_metrics: int, train_len: int):
        super().__init__(n_metrics, train_len)
        self.w = int(w)
        self.back = self.w
        self.prefix = self.w

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "MovingAverageDetector":
        params = _check_params(spec, {"w", "seed"})
        w = int(params.get("w", 20))
        if w < 2:
            raise ParameterError("moving_average: window must be >= 2")
        if train.length < 2:
            raise FitError("moving_average: needs at least 2 training points")
        return cls(w, train.n_metrics, train.length)

    def metric_row(self, view: SeriesView, j: int, t: int) -> float:
        if t >= self.w:
            a = t - self.w
        else:
            a = 0
        b = max(t + 1, min(self.w, view.end))
        # Contiguous copy: numpy reductions are only bit-reproducible for a
        # fixed memory layout, and this row must match the offline pass.
        x = np.ascontiguousarray(view.rows(a, b)[:, j])
        return _ma_row(x, x[t - a], self.w, t - a, view.end - a)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "w": self.w, "n_metrics": self.n_metrics,
                "train_len": self.train_len}

    @classmethod
    def from_state(cls, state) -> "MovingAverageDetector":
        return cls(state["w"], state["n_metrics"], state["train_len"])


# ---------------------------------------------------------------------------
# Chebyshev tail bound


def chebyshev_score(series: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    """Score via the Chebyshev bound: 0 inside one sigma, else 1 - 1/z^2."""
    x = np.asarray(series, dtype=np.float64)
    sd = sigma if sigma > 0 else EPS
    z = np.abs(x - mu) / sd
    return np.where(z <= 1.0, 0.0, 1.0 - 1.0 / np.square(np.maximum(z, 1.0)))


@builtin_kind("chebyshev")
class ChebyshevDetector(UnivariateDetector):
    def __init__(self, mu: np.ndarray, sigma: np.ndarray, train_len: int):
        super().__init__(len(mu), train_len)
        self.mu = np.asarray(mu, dtype=np.float64)
        self.sigma = np.asarray(sigma, dtype=np.float64)

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "ChebyshevDetector":
        _check_params(spec, {"seed"})
        if train.length < 2:
            raise FitError("chebyshev: needs at least 2 training points")
        return cls(train.values.mean(axis=0), train.values.std(axis=0), train.length)

    def metric_row(self, view: SeriesView, j: int, t: int) -> float:
        x = view.rows(t, t + 1)[0, j]
        sd = self.sigma[j] if self.sigma[j] > 0 else EPS
        z = abs(x - self.mu[j]) / sd
        if z <= 1.0:
            return 0.0
        return 1.0 - 1.0 / (z * z)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu.tolist(), "sigma": self.sigma.tolist(),
                "train_len": self.train_len}

    @classmethod
    def from_state(cls, state) -> "ChebyshevDetector":
        return cls(np.array(state["mu"]), np.array(state["sigma"]), state["train_len"])


# ---------------------------------------------------------------------------
# seasonal median difference (robust z of deviations from seasonal lags)


def _seasonal_diff(x: np.ndarray, t: int, p: int, m: int) -> float:
    """|x_t - median of its m seasonal lags|, with a trailing-median fallback
    for rows that do not yet have m full seasons behind them."""
    if t >= m * p:
        lags = x[t - m * p : t : p]
        med = lower_median(lags)
    else:
        a = max(0, t - p)
        if a == t:
            return 0.0
        med = lower_median(x[a:t])
    return abs(x[t] - med)


def mediff_score(series: np.ndarray, p: int, m: int = 3) -> np.ndarray:
    """Seasonal median-difference score, scaled by the series' own robust MAD."""
    x = np.asarray(series, dtype=np.float64)
    if p < 2:
        raise ParameterError("mediff: period must be >= 2")
    if x.shape[0] < m * p:
        raise FitError(f"mediff: needs at least {m * p} points")
    d = np.array([_seasonal_diff(x, t, p, m) for t in range(x.shape[0])])
    return d / (mad_scale(d) + EPS)


@builtin_kind("mediff")
class MediffDetector(UnivariateDetector):
    def __init__(self, p: int, m: int, scales: np.ndarray, train_len: int):
        super().__init__(len(scales), train_len)
        self.p = int(p)
        self.m = int(m)
        self.scales = np.asarray(scales, dtype=np.float64)
        self.back = self.m * self.p
        self.prefix = 0

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "MediffDetector":
        params = _check_params(spec, {"p", "m", "seed"})
        if "p" not in params:
            raise ParameterError("mediff: period p is required")
        p = int(params["p"])
        m = int(params.get("m", 3))
        if p < 2:
            raise ParameterError("mediff: period must be >= 2")
        if m < 1:
            raise ParameterError("mediff: lag count must be >= 1")
        if train.length < m * p:
            raise FitError(f"mediff: needs at least {m * p} training points")
        scales = np.empty(train.n_metrics)
        for j in range(train.n_metrics):
            col = train.values[:, j]
            d = np.array([_seasonal_diff(col, t, p, m) for t in range(train.length)])
            scales[j] = mad_scale(d)
        return cls(p, m, scales, train.length)

    def metric_row(self, view: SeriesView, j: int, t: int) -> float:
        a = max(0, t - self.m * self.p)
        col = np.ascontiguousarray(view.rows(a, t + 1)[:, j])
        d = _seasonal_diff(col, t - a, self.p, self.m)
        return d / (self.scales[j] + EPS)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, "m": self.m,
                "scales": self.scales.tolist(), "train_len": self.train_len}

    @classmethod
    def from_state(cls, state) -> "MediffDetector":
        return cls(state["p"], state["m"], np.array(state["scales"]), state["train_len"])


# ---------------------------------------------------------------------------
# seasonal-hybrid residual (per-phase median decomposition, MAD-scaled)


def shesd_residual_score(series: np.ndarray, p: int) -> np.ndarray:
    """Robust z of residuals after removing the per-phase median pattern and
    the global median of the de-seasonalized series.

    This is the hybrid (median/MAD) residual used by seasonal-hybrid ESD;
    the ESD decision itself happens downstream in the ensemble.
    """
    x = np.asarray(series, dtype=np.float64)
    if p < 2:
        raise ParameterError("shesd: period must be >= 2")
    if x.shape[0] < 2 * p:
        raise ParameterError(f"shesd: needs at least {2 * p} points")
    phases = np.arange(x.shape[0]) % p
    phase_med = np.array([lower_median(x[phases == f]) for f in range(p)])
    deseason = x - phase_med[phases]
    g = lower_median(deseason)
    r = deseason - g
    return np.abs(r) / (mad_scale(r) + EPS)


@builtin_kind("shesd")
class ShesdDetector(UnivariateDetector):
    def __init__(self, p: int, spacing: int, phase_medians: np.ndarray,
                 global_medians: np.ndarray, scales: np.ndarray, train_len: int):
        super().__init__(phase_medians.shape[1], train_len)
        self.p = int(p)
        self.spacing = int(spacing)
        self.phase_medians = np.asarray(phase_medians, dtype=np.float64)  # (p, n)
        self.global_medians = np.asarray(global_medians, dtype=np.float64)
        self.scales = np.asarray(scales, dtype=np.float64)

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "ShesdDetector":
        params = _check_params(spec, {"p", "seed"})
        if "p" not in params:
            raise ParameterError("shesd: period p is required")
        p = int(params["p"])
        if p < 2:
            raise ParameterError("shesd: period must be >= 2")
        if train.length < 2 * p:
            raise FitError(f"shesd: needs at least {2 * p} training points")
        spacing = train.spacing
        # Phase is anchored to absolute time so scoring segments stay aligned
        # with the training season regardless of where they start.
        phases = (train.timestamps // spacing) % p
        n = train.n_metrics
        phase_medians = np.empty((p, n))
        global_medians = np.empty(n)
        scales = np.empty(n)
        for j in range(n):
            col = train.values[:, j]
            for f in range(p):
                phase_medians[f, j] = lower_median(col[phases == f])
            deseason = col - phase_medians[phases, j]
            global_medians[j] = lower_median(deseason)
            r = deseason - global_medians[j]
            scales[j] = mad_scale(r)
        return cls(p, spacing, phase_medians, global_medians, scales, train.length)

    def metric_row(self, view: SeriesView, j: int, t: int) -> float:
        epoch = int(view.stamps(t, t + 1)[0])
        f = (epoch // self.spacing) % self.p
        x = view.rows(t, t + 1)[0, j]
        r = x - self.phase_medians[f, j] - self.global_medians[j]
        return abs(r) / (self.scales[j] + EPS)

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "spacing": self.spacing,
            "phase_medians": self.phase_medians.tolist(),
            "global_medians": self.global_medians.tolist(),
            "scales": self.scales.tolist(),
            "train_len": self.train_len,
        }

    @classmethod
    def from_state(cls, state) -> "ShesdDetector":
        return cls(
            state["p"],
            state["spacing"],
            np.array(state["phase_medians"]),
            np.array(state["global_medians"]),
            np.array(state["scales"]),
            state["train_len"],
        )
