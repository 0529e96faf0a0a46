import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avaba.classifiers import confusion_counts, train
from avaba.detector import (
    DEFAULT_MARGINS,
    Decision,
    DetectorConfig,
    decide,
    detect,
    detect_batch,
    margin_analysis,
    score_distribution,
    score_histogram,
    tune_threshold,
)
from avaba.features import FeatureMatrix

N_NORMAL, N_ATTACK = 3893, 13902


def published_scores():
    """Score arrays whose counts match the published margin table exactly.

    155 normals above 0.4 (of which 0 above 0.5), 293 above 0.3;
    0 attacks below 0.5 and 26 below 0.6.
    """
    normal = np.concatenate([np.full(155, 0.45), np.full(293 - 155, 0.35), np.full(N_NORMAL - 293, 0.05)])
    attack = np.concatenate([np.full(26, 0.55), np.full(N_ATTACK - 26, 0.95)])
    return normal, attack


# published rows: (lo, hi) -> (normal misclassified, attack misclassified, fp rate, fn rate)
TABLE = {
    (0.4, 0.5): (155, 0, 0.0398, 0.0),
    (0.3, 0.5): (293, 0, 0.0752, 0.0),
    (0.4, 0.6): (155, 26, 0.0398, 0.00187),
    (0.3, 0.6): (293, 26, 0.0752, 0.00187),
}


# ---------------------------------------------------------------- decisions


@pytest.mark.parametrize("score,threshold,expected", [
    (0.7, 0.5, Decision.ABNORMAL),
    (0.5, 0.5, Decision.NORMAL),
    (0.0, 0.0, Decision.NORMAL),
])
def test_strict_rule(score, threshold, expected):
    assert decide(score, threshold) == expected


def test_threshold_range():
    with pytest.raises(ValueError):
        DetectorConfig(1.5)
    with pytest.raises(ValueError):
        DetectorConfig(-0.1)


def _model():
    X = np.array([[0.0], [0.1], [0.2], [1.0], [1.1], [1.2]])
    return train("lr", FeatureMatrix(X, ("x",), np.array([0, 0, 0, 1, 1, 1])))


def test_detect_uses_model_score():
    m = _model()
    v = detect(DetectorConfig(0.5, m), [1.2])
    assert v.score == pytest.approx(m.predict_proba(np.array([1.2])))
    assert v.decision == Decision.ABNORMAL
    assert detect(DetectorConfig(0.5, m), [0.0]).decision == Decision.NORMAL
    with pytest.raises(ValueError):
        detect(DetectorConfig(0.5, m), [0.0, 1.0])
    with pytest.raises(ValueError):
        detect(DetectorConfig(0.5), [0.0])


def test_max_score_threshold_gives_no_alarms():
    m = _model()
    X = np.linspace(-1, 2, 40).reshape(-1, 1)
    scores = m.predict_proba(X)
    _, alarms = detect_batch(DetectorConfig(float(scores.max()), m), X)
    assert not alarms.any()


# ---------------------------------------------------------------- histograms


def test_histogram_first_bin():
    h = score_histogram(np.zeros(7), bins=10)
    assert h.counts[0] == 7 and h.n_samples == 7


def test_histogram_hand_binning():
    h = score_histogram([0.05, 0.15, 0.95], bins=10)
    assert h.counts.tolist() == [1, 1, 0, 0, 0, 0, 0, 0, 0, 1]
    with pytest.raises(ValueError):
        score_histogram([0.1], bins=0)


def test_published_class_totals():
    normal, attack = published_scores()
    assert score_histogram(normal).n_samples == N_NORMAL
    assert score_histogram(attack).n_samples == N_ATTACK


def test_score_distribution_per_class():
    m = _model()
    X = np.array([[0.0], [0.1], [1.1]])
    hn, ha = score_distribution(m, FeatureMatrix(X, ("x",), np.array([0, 0, 1])), bins=5)
    assert (hn.n_samples, ha.n_samples) == (2, 1)
    assert len(hn.rows()) == 5
    with pytest.raises(ValueError):
        score_distribution(m, FeatureMatrix(X, ("x",)))


@given(st.lists(st.floats(0, 1), max_size=100), st.integers(1, 60))
def test_histogram_counts_sum(scores, bins):
    assert score_histogram(scores, bins).n_samples == len(scores)


# ---------------------------------------------------------------- margins


@pytest.mark.parametrize("margin", list(TABLE))
def test_published_margin_rows(margin):
    normal, attack = published_scores()
    rep = margin_analysis(normal, attack, margin)
    nm, am, fp, fn = TABLE[margin]
    assert (rep.normal_misclassified, rep.attack_misclassified) == (nm, am)
    # 293/3893 = 0.075263 is printed truncated as 0.0752
    assert rep.fp_rate == pytest.approx(fp, abs=1e-4)
    assert rep.fn_rate == pytest.approx(fn, abs=5e-6)


def test_margin_hand_example():
    rep = margin_analysis([0.1, 0.45, 0.3], [0.9, 0.55], (0.4, 0.5))
    assert (rep.normal_misclassified, rep.attack_misclassified) == (1, 0)


def test_degenerate_margin():
    normal = np.array([0.0, 0.2, 1.0])
    attack = np.array([0.0, 0.7, 1.0])
    rep = margin_analysis(normal, attack, (0.0, 1.0))
    assert rep.normal_misclassified == 2
    assert rep.attack_misclassified == 2


def test_margin_errors():
    with pytest.raises(ValueError):
        margin_analysis([], [0.5], (0.4, 0.5))
    with pytest.raises(ValueError):
        margin_analysis([0.5], [0.5], (0.6, 0.5))
    with pytest.raises(ValueError):
        margin_analysis([1.5], [0.5], (0.4, 0.5))


def _brute(normal, attack, lo, hi):
    fp = sum(1 for s in normal if s > lo)
    fn = sum(1 for s in attack if s < hi)
    return fp, fn


@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=30),
    st.lists(st.floats(0, 1), min_size=1, max_size=30),
    st.floats(0, 1), st.floats(0, 1),
)
def test_margin_matches_brute_force(normal, attack, a, b):
    lo, hi = sorted((a, b))
    rep = margin_analysis(normal, attack, (lo, hi))
    assert (rep.normal_misclassified, rep.attack_misclassified) == _brute(normal, attack, lo, hi)
    assert 0 <= rep.fp_rate <= 1 and 0 <= rep.fn_rate <= 1
    assert round(rep.fp_rate * len(normal)) == rep.normal_misclassified
    assert round(rep.fn_rate * len(attack)) == rep.attack_misclassified


@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=30),
    st.lists(st.floats(0, 1), min_size=1, max_size=30),
    st.lists(st.floats(0, 1), min_size=4, max_size=4),
)
def test_widening_never_reduces_counts(normal, attack, cuts):
    c = sorted(cuts)
    inner = margin_analysis(normal, attack, (c[1], c[2]))
    outer = margin_analysis(normal, attack, (c[0], c[3]))
    assert outer.normal_misclassified >= inner.normal_misclassified
    assert outer.attack_misclassified >= inner.attack_misclassified


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0, 1))
def test_point_margin_consistency(normal, attack, t):
    rep = margin_analysis(normal, attack, (t, t))
    labels = np.array([0] * len(normal) + [1] * len(attack))
    _, fp, fn, _ = confusion_counts(labels, np.array(normal + attack), t)
    assert rep.normal_misclassified == fp
    assert rep.attack_misclassified == sum(1 for s in attack if s < t)
    assert fn - rep.attack_misclassified == sum(1 for s in attack if s == t)


# ---------------------------------------------------------------- tuning


def test_published_winner():
    normal, attack = published_scores()
    result = tune_threshold(normal, attack)
    assert (result.winner.lo, result.winner.hi) == (0.4, 0.5)
    assert result.threshold == pytest.approx(0.45)
    assert len(result.reports) == len(DEFAULT_MARGINS)


def test_first_two_rows():
    normal, attack = published_scores()
    result = tune_threshold(normal, attack, [(0.4, 0.5), (0.3, 0.5)])
    assert [r.normal_misclassified for r in result.reports] == [155, 293]
    assert [r.attack_misclassified for r in result.reports] == [0, 0]
    assert (result.winner.lo, result.winner.hi) == (0.4, 0.5)


def test_single_candidate_wins():
    result = tune_threshold([0.2], [0.8], [(0.1, 0.9)])
    assert (result.winner.lo, result.winner.hi) == (0.1, 0.9)


def test_tuning_errors():
    with pytest.raises(ValueError):
        tune_threshold([0.2], [0.8], [])
    with pytest.raises(ValueError):
        tune_threshold([0.2], [0.8], ranking="worst")


def test_alternative_rankings():
    normal, attack = published_scores()
    fp_first = tune_threshold(normal, attack, ranking="fp-first")
    assert fp_first.winner.fp_rate == min(r.fp_rate for r in fp_first.reports)
    total = tune_threshold(normal, attack, ranking="total")
    assert (total.winner.lo, total.winner.hi) == (0.4, 0.5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.integers(0, 2**31))
@settings(max_examples=100)
def test_alarm_counts_monotone_in_threshold(scores, seed):
    scores = np.array(scores)
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    prev = None
    for t in np.linspace(0, 1, 21):
        _, fp, fn, _ = confusion_counts(labels, scores, t)
        if prev is not None:
            assert fp <= prev[0] and fn >= prev[1]
        prev = (fp, fn)
