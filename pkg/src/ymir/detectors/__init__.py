"""Unsupervised representation models: every detector fits on a training
segment and emits one nonnegative raw score per timestamp.
"""

from .base import (
    EPS,
    DetectorSpec,
    FittedDetector,
    RawScoreSeries,
    SeriesView,
    UnivariateDetector,
    detector_from_state,
    fit_detector,
    known_kinds,
    lower_median,
    mad_scale,
    register_user_detector,
    score_detector,
    unregister_user_detector,
    validate_scores,
)
from .spatial import (
    IsolationForestDetector,
    LofDetector,
    average_path_length,
    isolation_forest_fit,
    isolation_forest_score,
    lof_fit,
    lof_score,
)
from .spectral import (
    SpectralResidualDetector,
    spectral_residual_saliency,
    spectral_residual_score,
)
from .statistical import (
    ChebyshevDetector,
    MediffDetector,
    MovingAverageDetector,
    ShesdDetector,
    chebyshev_score,
    mediff_score,
    moving_average_score,
    shesd_residual_score,
)
from .vae import (
    VaeDetector,
    VaeState,
    vae_fit,
    vae_init,
    vae_loss,
    vae_loss_and_grads,
    vae_score,
)

__all__ = [
    "EPS",
    "DetectorSpec",
    "FittedDetector",
    "RawScoreSeries",
    "SeriesView",
    "UnivariateDetector",
    "detector_from_state",
    "fit_detector",
    "known_kinds",
    "lower_median",
    "mad_scale",
    "register_user_detector",
    "score_detector",
    "unregister_user_detector",
    "validate_scores",
    "IsolationForestDetector",
    "LofDetector",
    "average_path_length",
    "isolation_forest_fit",
    "isolation_forest_score",
    "lof_fit",
    "lof_score",
    "SpectralResidualDetector",
    "spectral_residual_saliency",
    "spectral_residual_score",
    "ChebyshevDetector",
    "MediffDetector",
    "MovingAverageDetector",
    "ShesdDetector",
    "chebyshev_score",
    "mediff_score",
    "moving_average_score",
    "shesd_residual_score",
    "VaeDetector",
    "VaeState",
    "vae_fit",
    "vae_init",
    "vae_loss",
    "vae_loss_and_grads",
    "vae_score",
]
