"""Trained-model wrapper, kind registry and on-disk model format."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Mapping, Optional, Union

import numpy as np

from ..features import FeatureMatrix, Standardizer
from .forest import RandomForest
from .knn import KNearestNeighbors
from .linear import GaussianNB, LogisticRegression

FORMAT_VERSION = 1

# Plug-point: any class with fit(X, y, seed), predict_proba(X), get_state(),
# set_state(state), and a `defaults` dict of hyperparameters can be added here.
REGISTRY = {
    "lr": LogisticRegression,
    "rf": RandomForest,
    "knn": KNearestNeighbors,
    "gnb": GaussianNB,
}
ALIASES = {
    "logistic": "lr",
    "logistic_regression": "lr",
    "random_forest": "rf",
    "forest": "rf",
    "nb": "gnb",
    "naive_bayes": "gnb",
}
DISPLAY_NAMES = {"lr": "LR", "rf": "RF", "knn": "KNN", "gnb": "NB"}


class ModelFormatError(ValueError):
    pass


def resolve_kind(kind: str) -> str:
    kind = kind.strip().lower()
    kind = ALIASES.get(kind, kind)
    if kind not in REGISTRY:
        raise ValueError(f"unknown classifier kind {kind!r}; available: {sorted(REGISTRY)}")
    return kind


def resolve_hyperparams(kind: str, hyperparams: Optional[Mapping] = None) -> dict:
    cls = REGISTRY[resolve_kind(kind)]
    params = dict(cls.defaults)
    for key, value in (hyperparams or {}).items():
        if key not in params:
            raise ValueError(f"{kind}: unknown hyperparameter {key!r}; expected one of {sorted(params)}")
        params[key] = value
    return params


@dataclass
class TrainedModel:
    kind: str
    estimator: object
    hyperparams: dict
    seed: int
    feature_names: tuple
    scaler: Standardizer
    format_version: int = FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X):
        """Abnormality score in [0, 1]; a 1-D sample gives a float, a 2-D batch an array."""
        if isinstance(X, FeatureMatrix):
            self._check_names(X.feature_names)
            X = X.X
        arr = np.asarray(X, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        scores = np.clip(self.estimator.predict_proba(self.scaler.transform(arr)), 0.0, 1.0)
        return float(scores[0]) if single else scores

    def _check_names(self, names) -> None:
        if tuple(names) != tuple(self.feature_names):
            if len(names) != len(self.feature_names):
                raise ValueError(f"model expects {self.n_features} features, got {len(names)}")
            raise ValueError("feature names differ from the ones the model was trained on")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "kind": self.kind,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "scaler": self.scaler.to_dict(),
            "metadata": self.metadata,
            "state": self.estimator.get_state(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        version = d.get("format_version")
        if not isinstance(version, int):
            raise ModelFormatError("model file has no format_version")
        if version > FORMAT_VERSION:
            raise ModelFormatError(
                f"model file format version {version} is newer than supported version {FORMAT_VERSION}"
            )
        kind = resolve_kind(d["kind"])
        estimator = REGISTRY[kind](**d["hyperparams"])
        estimator.set_state(d["state"])
        return cls(
            kind,
            estimator,
            dict(d["hyperparams"]),
            int(d["seed"]),
            tuple(d["feature_names"]),
            Standardizer.from_dict(d["scaler"]),
            version,
            dict(d.get("metadata", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path: Union[str, PathLike]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def load(cls, path: Union[str, PathLike]) -> "TrainedModel":
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ModelFormatError(f"{path}: not a model file ({exc})") from None
        return cls.from_dict(d)


def train(
    kind: str,
    matrix: FeatureMatrix,
    hyperparams: Optional[Mapping] = None,
    seed: int = 0,
    metadata: Optional[dict] = None,
) -> TrainedModel:
    """Fit a classifier of ``kind`` on a labeled feature matrix.

    Features are z-scored with statistics from ``matrix`` alone and the
    scaler is stored with the model, so held-out data never leaks into it.
    """
    kind = resolve_kind(kind)
    params = resolve_hyperparams(kind, hyperparams)
    if matrix.labels is None:
        raise ValueError("training data must be labeled")
    if len(np.unique(matrix.labels)) < 2:
        raise ValueError("training data must contain both normal and abnormal samples")
    if not np.all(np.isfinite(matrix.X)):
        raise ValueError("training features contain NaN or Inf")
    scaler = Standardizer.fit(matrix.X)
    estimator = REGISTRY[kind](**params)
    estimator.fit(scaler.transform(matrix.X), matrix.labels, seed=seed)
    return TrainedModel(kind, estimator, params, int(seed), matrix.feature_names, scaler, FORMAT_VERSION, dict(metadata or {}))


def predict_proba(model: TrainedModel, sample):
    return model.predict_proba(sample)
