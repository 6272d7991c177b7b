"""Synthetic multivariate series with labeled anomaly injections.

The base signal is a per-metric sinusoid plus AR(1) noise mixed across
metrics through a fixed matrix, so the metrics are correlated the way
co-located system indicators are.  Five injection categories cover the
detector families: local spikes, seasonal phase violations, level shifts,
spatial decorrelation, and server-restart drops.  Restarts look dramatic
but are labeled normal: operators ignore them, and the supervised path is
expected to learn that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .data import LabelSeries, TimeSeriesSet
from .errors import DataError, ParameterError

CATEGORIES = ("spike", "phase_violation", "level_shift", "decorrelation", "restart")
ANOMALOUS = ("spike", "phase_violation", "level_shift", "decorrelation")


@dataclass(frozen=True)
class SynthProfile:
    length: int = 5000
    n_metrics: int = 6
    period: int = 288
    events: Mapping[str, int] = field(
        default_factory=lambda: {
            "spike": 16,
            "phase_violation": 8,
            "level_shift": 8,
            "decorrelation": 8,
            "restart": 10,
        }
    )
    seed: int = 0
    spacing: int = 60
    noise_scale: float = 0.25
    margin: int = 8

    def __post_init__(self):
        if self.length < 2 * self.period:
            raise ParameterError("length must cover at least two periods")
        if self.n_metrics < 2:
            raise ParameterError("need at least two metrics")
        unknown = set(self.events) - set(CATEGORIES)
        if unknown:
            raise ParameterError(f"unknown event categories {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "n_metrics": self.n_metrics,
            "period": self.period,
            "events": dict(self.events),
            "seed": self.seed,
            "spacing": self.spacing,
            "noise_scale": self.noise_scale,
            "margin": self.margin,
        }

    @staticmethod
    def from_dict(d: Mapping) -> "SynthProfile":
        return SynthProfile(**dict(d))


@dataclass(frozen=True)
class InjectedEvent:
    category: str
    start: int
    end: int
    metric: int | None = None

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "start": self.start,
            "end": self.end,
            "metric": self.metric,
        }


_DURATIONS = {
    "spike": (1, 2),
    "phase_violation": (24, 48),
    "level_shift": (20, 60),
    "decorrelation": (20, 50),
    "restart": (3, 10),
}


def _draw_window(rng: np.random.Generator, occupied: np.ndarray, duration: int,
                 margin: int, category: str) -> tuple[int, int]:
    T = occupied.shape[0]
    lo, hi = margin, T - duration - margin
    if hi <= lo:
        raise DataError(f"{category}: series too short for a {duration}-point event")
    for _ in range(100):
        start = int(rng.integers(lo, hi))
        a = max(0, start - margin)
        b = min(T, start + duration + margin)
        if not occupied[a:b].any():
            occupied[start : start + duration] = True
            return start, start + duration - 1
    raise DataError(f"{category}: could not place event after 100 attempts")


def generate_synthetic(profile: SynthProfile) -> tuple[TimeSeriesSet, LabelSeries, list[InjectedEvent]]:
    """Deterministic synthetic set: (data, full labels, injected events).

    Restart events carry label 0 even though every metric collapses; the
    other categories carry label 1 over their whole window.
    """
    rng = np.random.default_rng(profile.seed)
    T, n, P = profile.length, profile.n_metrics, profile.period

    amp = rng.uniform(1.0, 2.0, size=n)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
    offset = rng.uniform(4.0, 7.0, size=n)
    t = np.arange(T)
    seasonal = offset + amp * np.sin(2.0 * np.pi * t[:, None] / P + phase)

    # Correlated AR(1) noise: one dominant shared factor plus per-metric mix.
    mixing = rng.normal(0.0, 1.0, size=(n, n)) * 0.35
    mixing[:, 0] = rng.uniform(0.8, 1.2, size=n)
    latents = np.empty((T, n))
    state = np.zeros(n)
    shocks = rng.normal(0.0, 1.0, size=(T, n))
    for i in range(T):
        state = 0.7 * state + shocks[i]
        latents[i] = state
    noise = latents @ mixing.T * profile.noise_scale
    values = seasonal + noise

    labels = np.zeros(T, dtype=np.int8)
    occupied = np.zeros(T, dtype=bool)
    events: list[InjectedEvent] = []

    for category in CATEGORIES:
        for _ in range(int(profile.events.get(category, 0))):
            duration = int(rng.integers(_DURATIONS[category][0], _DURATIONS[category][1] + 1))
            start, end = _draw_window(rng, occupied, duration, profile.margin, category)
            span = slice(start, end + 1)
            metric: int | None = None
            if category == "spike":
                metric = int(rng.integers(0, n))
                direction = 1.0 if rng.random() < 0.5 else -1.0
                values[span, metric] += direction * rng.uniform(3.0, 5.0) * amp[metric]
                labels[span] = 1
            elif category == "phase_violation":
                shift = rng.uniform(np.pi / 2.0, np.pi)
                rows = np.arange(start, end + 1)
                violated = offset + amp * np.sin(
                    2.0 * np.pi * rows[:, None] / P + phase + shift
                )
                values[span] = violated + noise[span]
                labels[span] = 1
            elif category == "level_shift":
                metric = int(rng.integers(0, n))
                direction = 1.0 if rng.random() < 0.5 else -1.0
                values[span, metric] += direction * rng.uniform(1.5, 2.5) * amp[metric]
                labels[span] = 1
            elif category == "decorrelation":
                metric = int(rng.integers(0, n))
                rows = end + 1 - start
                independent = rng.normal(0.0, 1.0, size=rows)
                for i in range(1, rows):
                    independent[i] += 0.7 * independent[i - 1]
                values[span, metric] = (
                    seasonal[span, metric]
                    - noise[span].mean(axis=1) * 2.0
                    + independent * profile.noise_scale * 3.0
                )
                labels[span] = 1
            else:  # restart: everything collapses to ~0, labeled normal
                values[span] = rng.uniform(0.0, 0.05, size=(end + 1 - start, n))
                labels[span] = 0
            events.append(InjectedEvent(category, start, end, metric))

    timestamps = np.arange(T, dtype=np.int64) * profile.spacing
    names = tuple(f"metric_{i}" for i in range(n))
    ts = TimeSeriesSet(timestamps, values, names)
    label_series = LabelSeries(timestamps.copy(), labels, np.ones(T, dtype=bool))
    return ts, label_series, events
