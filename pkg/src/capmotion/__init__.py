"""Human activity recognition and repetition counting from wrist/leg
wearables that sense both inertial motion and body-capacitance change.

The package covers the full path from raw or simulated recordings to
evaluation artifacts: a circuit-level signal simulator, CSV ingestion,
sliding-window feature extraction (time, spectral, correlation), class
balancing, from-scratch forest and logistic classifiers, peak-based
repetition counting with sensor fusion, grouped cross-validation, and
two-wearer collaboration analysis.
"""

from .balance import SmoteConfig, smote
from .counting import (
    PeakConfig,
    count_source,
    counting_accuracy,
    detect_peaks,
    fft_smooth,
    fuse_counts,
    peak_config_for_class,
)
from .errors import (
    AlignmentError,
    CapmotionError,
    ConfigError,
    DataError,
    DomainError,
    NumericalError,
    ParseError,
    SchemaError,
    TrainingError,
)
from .evaluation import (
    EvalReport,
    confusion_matrix,
    hamming_loss,
    macro_f_score,
    make_random_folds,
    make_session_folds,
    precision_recall,
)
from .features import (
    FeatureNormalizer,
    FeatureVector,
    WindowingConfig,
    extract_features_gym,
    extract_features_leg,
    features_matrix,
    gym_feature_manifest,
    gym_feature_names,
    leg_feature_manifest,
    leg_feature_names,
    slide_windows,
)
from .ingest import PreprocessConfig, load_session, save_session
from .models import (
    ForestConfig,
    LogRegConfig,
    TrainedModel,
    load_model,
    predict_proba,
    save_model,
    soft_vote_smooth,
    train_random_forest,
    train_weighted_ovr_logistic,
    window_weight,
)
from .pairwise import (
    ClassMapping,
    SINGLE_USER_MAPPING,
    align_sessions,
    derive_pair_labels,
    pair_features,
    remap_labels,
)
from .pipeline import (
    RunConfig,
    count_sessions,
    run_fold_evaluation,
    run_pair_evaluation,
    run_random_split_evaluation,
    train_on_sessions,
)
from .simulate import (
    CircuitModel,
    ScriptSegment,
    default_gym_segments,
    default_leg7_segments,
    generate_collab_pair,
    generate_session,
    simulate_potential_response,
)
from .types import (
    COLLAB,
    DISCARD,
    GYM12,
    LEG7,
    LabelSet,
    Session,
    Window,
    get_label_set,
    validate_session,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "CapmotionError", "ConfigError", "DataError", "ParseError", "SchemaError",
    "AlignmentError", "DomainError", "NumericalError", "TrainingError",
    # core types
    "DISCARD", "LabelSet", "LEG7", "GYM12", "COLLAB", "get_label_set",
    "Session", "Window", "validate_session",
    # simulate
    "CircuitModel", "ScriptSegment", "simulate_potential_response",
    "generate_session", "default_leg7_segments", "default_gym_segments",
    "generate_collab_pair",
    # ingest
    "PreprocessConfig", "load_session", "save_session",
    # features
    "WindowingConfig", "FeatureVector", "FeatureNormalizer", "slide_windows",
    "extract_features_leg", "extract_features_gym", "features_matrix",
    "leg_feature_names", "gym_feature_names", "leg_feature_manifest",
    "gym_feature_manifest",
    # balance
    "SmoteConfig", "smote",
    # models
    "ForestConfig", "LogRegConfig", "TrainedModel", "train_random_forest",
    "train_weighted_ovr_logistic", "predict_proba", "window_weight",
    "soft_vote_smooth", "save_model", "load_model",
    # counting
    "PeakConfig", "fft_smooth", "detect_peaks", "counting_accuracy",
    "count_source", "peak_config_for_class", "fuse_counts",
    # evaluation
    "EvalReport", "make_session_folds", "make_random_folds",
    "confusion_matrix", "precision_recall", "macro_f_score", "hamming_loss",
    # pairwise
    "ClassMapping", "SINGLE_USER_MAPPING", "align_sessions",
    "derive_pair_labels", "remap_labels", "pair_features",
    # pipeline
    "RunConfig", "run_fold_evaluation", "run_random_split_evaluation",
    "train_on_sessions", "count_sessions", "run_pair_evaluation",
]
