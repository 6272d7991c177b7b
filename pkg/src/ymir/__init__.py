"""Ensemble anomaly detection for multivariate time series.

Unsupervised detectors produce normalized feature scores that feed both a
weighted generalized-ESD detector and a feedback-trained classifier; range
based F1 evaluates either path.
"""

__version__ = "0.1.0"

from .data import (
    LabelSeries,
    TimeSeriesSet,
    WindowView,
    full_labels,
    impute_missing,
    load_labels_csv,
    load_timeseries_csv,
    save_labels_csv,
    save_timeseries_csv,
    sliding_windows,
)
from .detectors import (
    DetectorSpec,
    RawScoreSeries,
    fit_detector,
    register_user_detector,
    score_detector,
)
from .ensemble import (
    EnsembleWeights,
    FeatureMatrix,
    Normalizer,
    UnsupervisedResult,
    aggregate_weighted,
    apply_weights,
    build_feature_matrix,
    detect_unsupervised,
    fit_normalizer,
    generalized_esd,
    normalize_scores,
)
from .evaluation import (
    EvaluationReport,
    MetricParams,
    RangeSet,
    best_range_f1,
    extract_ranges,
    range_f1,
    range_precision,
    range_recall,
)
from .labels import FusedLabels, fuse_labels, make_pseudo_labels, smooth_targets
from .pipeline import (
    ArtifactBundle,
    DetectionTable,
    PipelineConfig,
    default_detectors,
    detect_series,
    make_stream_context,
    train_pipeline,
)
from .stream import StreamContext
from .synth import InjectedEvent, SynthProfile, generate_synthetic
from .training import (
    TrainConfig,
    WindowDataset,
    build_dataset,
    predict_series,
    train_classifier,
    train_linear_baseline,
)

__all__ = [
    "__version__",
    "LabelSeries",
    "TimeSeriesSet",
    "WindowView",
    "full_labels",
    "impute_missing",
    "load_labels_csv",
    "load_timeseries_csv",
    "save_labels_csv",
    "save_timeseries_csv",
    "sliding_windows",
    "DetectorSpec",
    "RawScoreSeries",
    "fit_detector",
    "register_user_detector",
    "score_detector",
    "EnsembleWeights",
    "FeatureMatrix",
    "Normalizer",
    "UnsupervisedResult",
    "aggregate_weighted",
    "apply_weights",
    "build_feature_matrix",
    "detect_unsupervised",
    "fit_normalizer",
    "generalized_esd",
    "normalize_scores",
    "EvaluationReport",
    "MetricParams",
    "RangeSet",
    "best_range_f1",
    "extract_ranges",
    "range_f1",
    "range_precision",
    "range_recall",
    "FusedLabels",
    "fuse_labels",
    "make_pseudo_labels",
    "smooth_targets",
    "ArtifactBundle",
    "DetectionTable",
    "PipelineConfig",
    "default_detectors",
    "detect_series",
    "make_stream_context",
    "train_pipeline",
    "StreamContext",
    "InjectedEvent",
    "SynthProfile",
    "generate_synthetic",
    "TrainConfig",
    "WindowDataset",
    "build_dataset",
    "predict_series",
    "train_classifier",
    "train_linear_baseline",
]
