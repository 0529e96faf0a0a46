"""Binary metrics with abnormal as the positive class, and stratified cross-validation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..data import stratified_kfold
from ..features import FeatureMatrix
from .model import TrainedModel, train

METRIC_NAMES = ("precision", "recall", "f1", "accuracy")


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> EvalMetrics:
    """Precision/recall are 0 when their denominator is 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return EvalMetrics(precision, recall, f1_score(precision, recall), accuracy, tp, fp, fn, tn)


def confusion_counts(labels, scores, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) for decisions ``score > threshold``."""
    labels = np.asarray(labels).astype(bool)
    flagged = np.asarray(scores, dtype=float) > threshold
    tp = int(np.sum(flagged & labels))
    fp = int(np.sum(flagged & ~labels))
    fn = int(np.sum(~flagged & labels))
    tn = int(np.sum(~flagged & ~labels))
    return tp, fp, fn, tn


def evaluate(model: TrainedModel, test: FeatureMatrix, threshold: float = 0.5) -> EvalMetrics:
    if test.n_samples == 0:
        raise ValueError("test set is empty")
    if test.labels is None:
        raise ValueError("test set must be labeled")
    scores = model.predict_proba(test)
    return metrics_from_counts(*confusion_counts(test.labels, scores, threshold))


@dataclass(frozen=True)
class CVResult:
    kind: str
    folds: tuple
    test_sizes: tuple

    @property
    def mean(self) -> dict:
        return {name: float(np.mean([getattr(f, name) for f in self.folds])) for name in METRIC_NAMES}


def cross_validate(
    kind: str,
    matrix: FeatureMatrix,
    k: int = 5,
    hyperparams: Optional[Mapping] = None,
    seed: int = 0,
    threshold: float = 0.5,
) -> CVResult:
    """Stratified k-fold: train on k-1 folds, score the held-out fold at ``threshold``.

    Every fold's model is trained with the same ``seed``.
    """
    if matrix.labels is None:
        raise ValueError("cross-validation needs labeled data")
    folds = stratified_kfold(matrix.labels, k, seed)
    results, sizes = [], []
    all_idx = np.arange(matrix.n_samples)
    for test_idx in folds:
        train_idx = np.setdiff1d(all_idx, test_idx, assume_unique=True)
        model = train(kind, matrix.subset(train_idx), hyperparams, seed)
        results.append(evaluate(model, matrix.subset(test_idx), threshold))
        sizes.append(len(test_idx))
    return CVResult(model.kind, tuple(results), tuple(sizes))
