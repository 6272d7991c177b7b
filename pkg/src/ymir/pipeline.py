"""End-to-end orchestration: configuration, training, persistence, offline
and streaming detection, and evaluation glue.

Artifacts are frozen after training.  Everything persisted is JSON (floats
written with shortest round-trip repr, so reload is bit-exact) except the
time-indexed score table, which is CSV.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .classifier import ClassifierModel
from .data import LabelSeries, TimeSeriesSet, load_timeseries_csv
from .detectors import (
    DetectorSpec,
    FittedDetector,
    RawScoreSeries,
    detector_from_state,
    fit_detector,
    known_kinds,
    score_detector,
)
from .ensemble import (
    EnsembleWeights,
    FeatureMatrix,
    Normalizer,
    UnsupervisedResult,
    build_feature_matrix,
    detect_unsupervised,
    fit_normalizer,
)
from .errors import (
    ContractError,
    ManifestError,
    ParameterError,
    ParseError,
    UsageError,
)
from .labels import FusedLabels, fuse_labels, make_pseudo_labels
from .stream import StreamContext
from .training import TrainConfig, build_dataset, train_classifier

DEFAULT_KINDS = (
    "mediff",
    "shesd",
    "moving_average",
    "chebyshev",
    "spectral_residual",
    "vae_recon",
    "isolation_forest",
    "lof",
)


def default_detectors(period: int) -> tuple[DetectorSpec, ...]:
    """One spec per built-in kind; seasonal kinds take the given period."""
    specs = []
    for kind in DEFAULT_KINDS:
        params = {"p": period} if kind in ("mediff", "shesd") else {}
        specs.append(DetectorSpec(kind, params))
    return tuple(specs)


def assign_model_ids(specs: Sequence[DetectorSpec]) -> tuple[str, ...]:
    """Deterministic unique column names: the kind, suffixed on repeats."""
    seen: dict[str, int] = {}
    ids = []
    for spec in specs:
        name = spec.kind.replace(":", "_")
        seen[name] = seen.get(name, 0) + 1
        ids.append(name if seen[name] == 1 else f"{name}_{seen[name]}")
    return tuple(ids)


@dataclass(frozen=True)
class PipelineConfig:
    detectors: tuple[DetectorSpec, ...]
    weights: tuple[float, ...] | None = None
    esd_alpha: float = 0.05
    esd_r_max_frac: float = 0.02
    window: int = 32
    d_model: int = 16
    conv_channels: int = 8
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.detectors:
            raise ParameterError("config needs at least one detector")
        if self.weights is not None and len(self.weights) != len(self.detectors):
            raise ParameterError("one weight per detector required")
        if not 0.0 < self.esd_alpha < 1.0:
            raise ParameterError("esd_alpha must lie in (0, 1)")
        if not 0.0 < self.esd_r_max_frac <= 0.5:
            raise ParameterError("esd_r_max_frac must lie in (0, 0.5]")
        if self.window < 2:
            raise ParameterError("classifier window must be >= 2")
        for spec in self.detectors:
            if spec.kind not in known_kinds():
                raise ParameterError(f"unknown detector kind {spec.kind!r}")

    def ensemble_weights(self) -> EnsembleWeights:
        if self.weights is None:
            return EnsembleWeights.default(len(self.detectors))
        return EnsembleWeights(np.array(self.weights, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "detectors": [s.to_dict() for s in self.detectors],
            "weights": list(self.weights) if self.weights is not None else None,
            "esd_alpha": self.esd_alpha,
            "esd_r_max_frac": self.esd_r_max_frac,
            "window": self.window,
            "d_model": self.d_model,
            "conv_channels": self.conv_channels,
            "seed": self.seed,
            "train": self.train.to_dict(),
        }

    @staticmethod
    def from_dict(d: Mapping) -> "PipelineConfig":
        try:
            return PipelineConfig(
                detectors=tuple(DetectorSpec.from_dict(s) for s in d["detectors"]),
                weights=tuple(d["weights"]) if d.get("weights") is not None else None,
                esd_alpha=float(d.get("esd_alpha", 0.05)),
                esd_r_max_frac=float(d.get("esd_r_max_frac", 0.02)),
                window=int(d.get("window", 32)),
                d_model=int(d.get("d_model", 16)),
                conv_channels=int(d.get("conv_channels", 8)),
                seed=int(d.get("seed", 0)),
                train=TrainConfig.from_dict(d.get("train", {})),
            )
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed pipeline config: {exc}") from None

    @staticmethod
    def load(path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return PipelineConfig.from_dict(json.load(fh))


def data_fingerprint(ts: TimeSeriesSet) -> dict:
    digest = hashlib.sha256()
    digest.update(ts.timestamps.tobytes())
    digest.update(ts.values.tobytes())
    return {
        "length": ts.length,
        "n_metrics": ts.n_metrics,
        "metric_names": list(ts.metric_names),
        "spacing": ts.spacing,
        "sha256": digest.hexdigest(),
    }


@dataclass
class ArtifactBundle:
    """Everything a detection run needs, frozen after training."""

    config: PipelineConfig
    model_ids: tuple[str, ...]
    detectors: list[FittedDetector]
    normalizer: Normalizer
    classifier: ClassifierModel | None
    mode: str
    rho: float
    fingerprint: dict

    def weights(self) -> EnsembleWeights:
        return self.config.ensemble_weights()

    def check_compatible(self, ts: TimeSeriesSet) -> None:
        if list(ts.metric_names) != self.fingerprint["metric_names"]:
            raise ManifestError(
                f"metric names {list(ts.metric_names)} do not match the "
                f"trained manifest {self.fingerprint['metric_names']}"
            )

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        states_dir = out / "states"
        states_dir.mkdir(exist_ok=True)
        state_files = []
        for model_id, det in zip(self.model_ids, self.detectors):
            rel = f"states/{model_id}.json"
            _write_json(out / rel, det.state_dict())
            state_files.append(rel)
        _write_json(out / "normalizer.json", self.normalizer.to_dict())
        if self.classifier is not None:
            _write_json(out / "classifier.json", self.classifier.to_dict())
        manifest = {
            "version": __version__,
            "mode": self.mode,
            "rho": self.rho,
            "config": self.config.to_dict(),
            "model_ids": list(self.model_ids),
            "fingerprint": self.fingerprint,
            "files": {
                "detectors": state_files,
                "normalizer": "normalizer.json",
                "classifier": "classifier.json" if self.classifier is not None else None,
            },
        }
        _write_json(out / "manifest.json", manifest)
        return out / "manifest.json"

    @staticmethod
    def load(model_dir) -> "ArtifactBundle":
        root = Path(model_dir)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise ManifestError(f"no manifest.json under {root}")
        manifest = _read_json(manifest_path)
        config = PipelineConfig.from_dict(manifest["config"])
        detectors = [
            detector_from_state(_read_json(root / rel))
            for rel in manifest["files"]["detectors"]
        ]
        normalizer = Normalizer.from_dict(_read_json(root / manifest["files"]["normalizer"]))
        classifier = None
        if manifest["files"]["classifier"] is not None:
            classifier = ClassifierModel.from_dict(
                _read_json(root / manifest["files"]["classifier"])
            )
        return ArtifactBundle(
            config=config,
            model_ids=tuple(manifest["model_ids"]),
            detectors=detectors,
            normalizer=normalizer,
            classifier=classifier,
            mode=manifest["mode"],
            rho=float(manifest["rho"]),
            fingerprint=manifest["fingerprint"],
        )


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


@dataclass
class TrainOutcome:
    bundle: ArtifactBundle
    features: FeatureMatrix
    result: UnsupervisedResult
    fused: FusedLabels | None
    classifier_losses: list[float]


def train_pipeline(config: PipelineConfig, ts: TimeSeriesSet,
                   labels: LabelSeries | None = None,
                   with_classifier: bool = True) -> TrainOutcome:
    """Fit detectors and normalizer, run the unsupervised path, fuse labels,
    and (unless disabled) train the classifier on the smoothed targets."""
    if ts.has_missing():
        raise ContractError("training data contains NaNs; impute first")
    if labels is not None and labels.length != ts.length:
        raise ContractError("labels and data disagree on length")

    model_ids = assign_model_ids(config.detectors)
    detectors = []
    raw_series = []
    for i, spec in enumerate(config.detectors):
        params = dict(spec.params)
        params.setdefault("seed", config.seed * 1000 + i)
        det = fit_detector(DetectorSpec(spec.kind, params, spec.weight_hint), ts)
        detectors.append(det)
        raw_series.append(RawScoreSeries(model_ids[i], score_detector(det, ts)))

    normalizer = fit_normalizer(raw_series)
    features = build_feature_matrix(raw_series, normalizer)
    weights = config.ensemble_weights()
    result = detect_unsupervised(
        features,
        weights,
        alpha=config.esd_alpha,
        r_max=max(1, int(np.ceil(config.esd_r_max_frac * ts.length))),
    )

    rho = labels.rho if labels is not None else 0.0
    mode = "unsupervised"
    if labels is not None and rho >= 1.0:
        mode = "supervised"
    elif labels is not None and rho > 0.0:
        mode = "semi_supervised"

    fused = None
    classifier = None
    losses: list[float] = []
    if with_classifier:
        pseudo = make_pseudo_labels(result, config.train.confidence_threshold, ts.length)
        user = labels if labels is not None else LabelSeries(
            ts.timestamps.copy(),
            np.zeros(ts.length, dtype=np.int8),
            np.zeros(ts.length, dtype=bool),
        )
        fused = fuse_labels(pseudo, user, config.train.epsilon_max)
        dataset = build_dataset(ts, features.values, fused.targets, config.window)
        classifier, losses = train_classifier(
            dataset,
            config.train,
            d_model=config.d_model,
            conv_channels=config.conv_channels,
            model_ids=model_ids,
        )

    bundle = ArtifactBundle(
        config=config,
        model_ids=model_ids,
        detectors=detectors,
        normalizer=normalizer,
        classifier=classifier,
        mode=mode,
        rho=rho,
        fingerprint=data_fingerprint(ts),
    )
    return TrainOutcome(bundle, features, result, fused, losses)


@dataclass
class DetectionTable:
    """Per-timestamp scores: normalized features, aggregate, classifier, flag."""

    timestamps: np.ndarray
    model_ids: tuple[str, ...]
    features: np.ndarray
    aggregate: np.ndarray
    classifier: np.ndarray | None
    flags: np.ndarray
    result: UnsupervisedResult

    def column(self, name: str) -> np.ndarray:
        if name == "aggregate":
            return self.aggregate
        if name == "classifier":
            if self.classifier is None:
                raise ContractError("no classifier column in this table")
            return self.classifier
        return self.features[:, self.model_ids.index(name)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["timestamp", *self.model_ids, "aggregate"]
            if self.classifier is not None:
                header.append("classifier")
            header.append("flag")
            writer.writerow(header)
            for i in range(self.timestamps.shape[0]):
                row = [int(self.timestamps[i])]
                row += [repr(float(v)) for v in self.features[i]]
                row.append(repr(float(self.aggregate[i])))
                if self.classifier is not None:
                    row.append(repr(float(self.classifier[i])))
                row.append(int(self.flags[i]))
                writer.writerow(row)


def make_stream_context(bundle: ArtifactBundle) -> StreamContext:
    return StreamContext(
        bundle.detectors,
        list(bundle.model_ids),
        bundle.normalizer,
        bundle.weights(),
        bundle.classifier,
        esd_alpha=bundle.config.esd_alpha,
        esd_r_max_frac=bundle.config.esd_r_max_frac,
    )


def detect_series(bundle: ArtifactBundle, ts: TimeSeriesSet,
                  batch_size: int | None = None) -> DetectionTable:
    """Score a whole series through the streaming context.

    ``batch_size=None`` feeds the series as one batch (offline mode); any
    positive batch size replays it in chunks.  Both produce identical rows.
    """
    bundle.check_compatible(ts)
    if ts.has_missing():
        raise ContractError("detection data contains NaNs; impute first")
    ctx = make_stream_context(bundle)
    rows = []
    step = ts.length if batch_size is None else int(batch_size)
    if step < 1:
        raise ParameterError("batch size must be >= 1")
    for start in range(0, ts.length, step):
        stop = min(start + step, ts.length)
        rows.extend(ctx.append(ts.timestamps[start:stop], ts.values[start:stop]))
    tail, result = ctx.finalize()
    rows.extend(tail)

    T = ts.length
    features = np.empty((T, len(bundle.model_ids)))
    aggregate = np.empty(T)
    classifier = None if bundle.classifier is None else np.empty(T)
    for row in rows:
        features[row.index] = row.feature_scores
        aggregate[row.index] = row.aggregate
        if classifier is not None:
            classifier[row.index] = row.classifier
    flags = np.zeros(T, dtype=np.int8)
    for t in result.flagged:
        flags[t] = 1
    return DetectionTable(
        ts.timestamps.copy(), bundle.model_ids, features, aggregate, classifier,
        flags, result,
    )


def read_scores_csv(path) -> DetectionTable:
    """Reload a scores CSV written by :meth:`DetectionTable.write_csv`."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "timestamp" or header[-1] != "flag":
            raise ParseError(f"{path}: not a scores CSV")
        has_classifier = "classifier" in header
        mid = header[1:-1]
        if has_classifier:
            mid = mid[:-1]
        if not mid or mid[-1] != "aggregate":
            raise ParseError(f"{path}: missing aggregate column")
        model_ids = tuple(mid[:-1])
        rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    timestamps = np.array([int(r[0]) for r in rows], dtype=np.int64)
    k = len(model_ids)
    features = np.array([[float(v) for v in r[1 : 1 + k]] for r in rows])
    aggregate = np.array([float(r[1 + k]) for r in rows])
    classifier = None
    col = 2 + k
    if has_classifier:
        classifier = np.array([float(r[col]) for r in rows])
        col += 1
    flags = np.array([int(r[col]) for r in rows], dtype=np.int8)
    flagged = frozenset(int(i) for i in np.nonzero(flags)[0])
    result = UnsupervisedResult(
        flagged, {int(t): float(aggregate[t]) for t in flagged}, aggregate
    )
    return DetectionTable(timestamps, model_ids, features, aggregate, classifier,
                          flags, result)


def load_clean_timeseries(path) -> TimeSeriesSet:
    from .data import impute_missing

    ts = load_timeseries_csv(path)
    return impute_missing(ts) if ts.has_missing() else ts
