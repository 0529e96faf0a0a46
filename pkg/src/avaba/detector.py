"""Threshold detector over abnormality scores, score histograms and margin tuning.

The detector pairs a scoring function with the model it consults (the
trained classifier acting as memory of normal behavior). A sample is
Abnormal only when its score is strictly above the threshold.

A detection margin ``[lo, hi]`` is a range of candidate thresholds. Its
cost is the worst case over that range: every normal sample scoring above
``lo`` may raise a false alarm and every attack sample scoring below ``hi``
may be missed.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .classifiers import TrainedModel
from .features import FeatureMatrix

# Candidate margins evaluated by default, as (lo, hi).
DEFAULT_MARGINS = ((0.4, 0.5), (0.3, 0.5), (0.4, 0.6), (0.3, 0.6))
DEFAULT_BINS = 50


class Decision(str, Enum):
    NORMAL = "Normal"
    ABNORMAL = "Abnormal"


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float
    model: Optional[TrainedModel] = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold!r}")


@dataclass(frozen=True)
class Verdict:
    score: float
    decision: Decision


def decide(score: float, threshold: float) -> Decision:
    return Decision.ABNORMAL if score > threshold else Decision.NORMAL


def detect(config: DetectorConfig, sample) -> Verdict:
    if config.model is None:
        raise ValueError("detector has no model")
    score = config.model.predict_proba(np.asarray(sample, dtype=float))
    return Verdict(score, decide(score, config.threshold))


def detect_batch(config: DetectorConfig, X) -> tuple[np.ndarray, np.ndarray]:
    """Scores and boolean alarms (``score > threshold``) for every row."""
    if config.model is None:
        raise ValueError("detector has no model")
    scores = np.atleast_1d(config.model.predict_proba(X))
    return scores, scores > config.threshold


@dataclass(frozen=True)
class ScoreDistribution:
    label: str
    edges: np.ndarray
    counts: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    def rows(self):
        """(bin_lo, bin_hi, count) triples, ready for tabular output."""
        return [(float(self.edges[i]), float(self.edges[i + 1]), int(self.counts[i])) for i in range(len(self.counts))]


def score_histogram(scores, bins: int = DEFAULT_BINS, label: str = "") -> ScoreDistribution:
    if bins < 1:
        raise ValueError("bins must be at least 1")
    scores = np.asarray(scores, dtype=float)
    counts, edges = np.histogram(scores, bins=bins, range=(0.0, 1.0))
    return ScoreDistribution(label, edges, counts)


def score_distribution(model: TrainedModel, matrix: FeatureMatrix, bins: int = DEFAULT_BINS):
    """Separate score histograms for the normal and abnormal rows of ``matrix``."""
    if matrix.labels is None:
        raise ValueError("score distributions need labeled data")
    scores = np.atleast_1d(model.predict_proba(matrix))
    return (
        score_histogram(scores[matrix.labels == 0], bins, "normal"),
        score_histogram(scores[matrix.labels == 1], bins, "abnormal"),
    )


@dataclass(frozen=True)
class MarginReport:
    lo: float
    hi: float
    normal_misclassified: int
    attack_misclassified: int
    n_normal: int
    n_attack: int

    @property
    def fp_rate(self) -> float:
        return self.normal_misclassified / self.n_normal

    @property
    def fn_rate(self) -> float:
        return self.attack_misclassified / self.n_attack

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def label(self) -> str:
        return f"{self.lo:g} - {self.hi:g}"


def _check_scores(scores, name: str) -> np.ndarray:
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise ValueError(f"{name} scores are empty; rates are undefined")
    if np.any((scores < 0) | (scores > 1)) or not np.all(np.isfinite(scores)):
        raise ValueError(f"{name} scores must lie in [0, 1]")
    return scores


def margin_analysis(normal_scores, attack_scores, margin: Sequence[float]) -> MarginReport:
    lo, hi = float(margin[0]), float(margin[1])
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"margin must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    normal = _check_scores(normal_scores, "normal")
    attack = _check_scores(attack_scores, "attack")
    return MarginReport(
        lo,
        hi,
        int(np.count_nonzero(normal > lo)),
        int(np.count_nonzero(attack < hi)),
        normal.size,
        attack.size,
    )


RANKINGS = {
    "fn-first": lambda r: (r.fn_rate, r.fp_rate),
    "fp-first": lambda r: (r.fp_rate, r.fn_rate),
    "total": lambda r: (r.normal_misclassified + r.attack_misclassified, r.fn_rate),
}


@dataclass(frozen=True)
class TuningResult:
    reports: tuple  # ranked, best first
    winner: MarginReport

    @property
    def threshold(self) -> float:
        """Threshold placed in the middle of the winning margin."""
        return self.winner.midpoint


def tune_threshold(
    normal_scores,
    attack_scores,
    candidate_margins: Optional[Sequence[Sequence[float]]] = None,
    ranking: str = "fn-first",
) -> TuningResult:
    """Evaluate every candidate margin and rank them; ties keep candidate order."""
    candidates = DEFAULT_MARGINS if candidate_margins is None else tuple(candidate_margins)
    if not candidates:
        raise ValueError("at least one candidate margin is required")
    try:
        key = RANKINGS[ranking]
    except KeyError:
        raise ValueError(f"unknown ranking {ranking!r}; expected one of {sorted(RANKINGS)}") from None
    reports = [margin_analysis(normal_scores, attack_scores, m) for m in candidates]
    ranked = tuple(sorted(reports, key=key))
    return TuningResult(ranked, ranked[0])
