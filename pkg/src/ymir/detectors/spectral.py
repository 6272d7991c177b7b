"""Spectral-residual saliency detector.

Each scored row takes the last position of a sliding DFT window: the log
amplitude spectrum minus its short mean filter is the spectral residual,
and the inverse transform of exp(residual + i*phase) is the saliency map.
The emitted score is the relative excess of the row's saliency over the
window's mean saliency.  Rows before the first full window reuse the first
window's saliency at their own position.
"""

from __future__ import annotations

import numpy as np

from ..data import TimeSeriesSet
from ..errors import FitError, ParameterError, SizeError
from .base import EPS, DetectorSpec, SeriesView, UnivariateDetector, builtin_kind
from .statistical import _check_params


def spectral_residual_saliency(window: np.ndarray, q: int = 3) -> np.ndarray:
    """Saliency map of one window via the spectral-residual transform."""
    f = np.fft.fft(window)
    amplitude = np.abs(f)
    phase = np.angle(f)
    log_amp = np.log(amplitude + EPS)
    pad = q // 2
    padded = np.concatenate(
        [np.full(pad, log_amp[0]), log_amp, np.full(pad, log_amp[-1])]
    )
    smoothed = np.convolve(padded, np.full(q, 1.0 / q), mode="valid")
    residual = log_amp - smoothed
    return np.abs(np.fft.ifft(np.exp(residual + 1j * phase)))


def _sr_row(window: np.ndarray, pos: int, q: int) -> float:
    if np.ptp(window) == 0.0:
        return 0.0
    saliency = spectral_residual_saliency(window, q)
    local_mean = saliency.mean()
    score = (saliency[pos] - local_mean) / (local_mean + EPS)
    return score if score > 0.0 else 0.0


def spectral_residual_score(series: np.ndarray, omega: int = 64, q: int = 3) -> np.ndarray:
    """Spectral-residual score of a single series; window ``omega`` must be a
    power of two and ``q`` odd."""
    _validate_sr_params(omega, q)
    x = np.asarray(series, dtype=np.float64)
    if omega > x.shape[0]:
        raise SizeError(f"spectral_residual: window {omega} exceeds length {x.shape[0]}")
    out = np.empty(x.shape[0])
    for t in range(x.shape[0]):
        if t >= omega - 1:
            out[t] = _sr_row(x[t - omega + 1 : t + 1], omega - 1, q)
        else:
            out[t] = _sr_row(x[:omega], t, q)
    return out


def _validate_sr_params(omega: int, q: int) -> None:
    if omega < 4 or omega & (omega - 1) != 0:
        raise ParameterError("spectral_residual: window must be a power of two >= 4")
    if q < 1 or q % 2 == 0:
        raise ParameterError("spectral_residual: filter length must be odd")


@builtin_kind("spectral_residual")
class SpectralResidualDetector(UnivariateDetector):
    def __init__(self, omega: int, q: int, n_metrics: int, train_len: int):
        super().__init__(n_metrics, train_len)
        self.omega = int(omega)
        self.q = int(q)
        self.back = self.omega - 1
        self.prefix = self.omega

    @classmethod
    def fit(cls, spec: DetectorSpec, train: TimeSeriesSet) -> "SpectralResidualDetector":
        params = _check_params(spec, {"omega", "q", "seed"})
        omega = int(params.get("omega", 64))
        q = int(params.get("q", 3))
        _validate_sr_params(omega, q)
        if train.length < omega:
            raise FitError(f"spectral_residual: needs at least {omega} training points")
        return cls(omega, q, train.n_metrics, train.length)

    def metric_row(self, view: SeriesView, j: int, t: int) -> float:
        if view.end < self.omega:
            raise SizeError(
                f"spectral_residual: window {self.omega} exceeds length {view.end}"
            )
        if t >= self.omega - 1:
            window = np.ascontiguousarray(view.rows(t - self.omega + 1, t + 1)[:, j])
            return _sr_row(window, self.omega - 1, self.q)
        window = np.ascontiguousarray(view.rows(0, self.omega)[:, j])
        return _sr_row(window, t, self.q)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "omega": self.omega, "q": self.q,
                "n_metrics": self.n_metrics, "train_len": self.train_len}

    @classmethod
    def from_state(cls, state) -> "SpectralResidualDetector":
        return cls(state["omega"], state["q"], state["n_metrics"], state["train_len"])
