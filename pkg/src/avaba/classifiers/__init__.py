"""From-scratch binary classifiers scoring the abnormal class."""
from .evaluation import (
    METRIC_NAMES,
    CVResult,
    EvalMetrics,
    confusion_counts,
    cross_validate,
    evaluate,
    f1_score,
    metrics_from_counts,
)
from .forest import RandomForest, Tree, best_split_on_feature, grow_tree
from .knn import KNearestNeighbors
from .linear import GaussianNB, LogisticRegression
from .model import (
    DISPLAY_NAMES,
    FORMAT_VERSION,
    REGISTRY,
    ModelFormatError,
    TrainedModel,
    predict_proba,
    resolve_hyperparams,
    resolve_kind,
    train,
)

__all__ = [
    "METRIC_NAMES", "CVResult", "EvalMetrics", "confusion_counts", "cross_validate", "evaluate",
    "f1_score", "metrics_from_counts", "RandomForest", "Tree", "best_split_on_feature", "grow_tree",
    "KNearestNeighbors", "GaussianNB", "LogisticRegression", "DISPLAY_NAMES", "FORMAT_VERSION",
    "REGISTRY", "ModelFormatError", "TrainedModel", "predict_proba", "resolve_hyperparams",
    "resolve_kind", "train",
]
