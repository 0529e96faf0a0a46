import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avaba.classifiers import (
    FORMAT_VERSION,
    EvalMetrics,
    GaussianNB,
    KNearestNeighbors,
    LogisticRegression,
    ModelFormatError,
    RandomForest,
    TrainedModel,
    best_split_on_feature,
    confusion_counts,
    cross_validate,
    evaluate,
    f1_score,
    grow_tree,
    metrics_from_counts,
    predict_proba,
    train,
)
from avaba.features import FeatureMatrix, Standardizer

KINDS = ["lr", "rf", "knn", "gnb"]


def blobs(n=80, d=3, gap=4.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n, d)), rng.normal(gap, 1, (n, d))])
    y = np.array([0] * n + [1] * n)
    return FeatureMatrix(X, tuple(f"f{i}" for i in range(d)), y)


def two_clusters():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [5.0], [5.1], [5.2], [5.3]])
    return FeatureMatrix(X, ("x",), np.array([0, 0, 0, 0, 1, 1, 1, 1]))


# ---------------------------------------------------------------- training


@pytest.mark.parametrize("kind", KINDS)
def test_separable_training_accuracy(kind):
    fm = two_clusters()
    hp = {"k": 3} if kind == "knn" else None
    m = train(kind, fm, hp, seed=1)
    assert evaluate(m, fm).accuracy == 1.0


@pytest.mark.parametrize("kind", KINDS)
def test_rejects_bad_training_data(kind):
    fm = two_clusters()
    with pytest.raises(ValueError):
        train(kind, FeatureMatrix(fm.X, fm.feature_names, np.zeros(8, dtype=int)))
    with pytest.raises(ValueError):
        train(kind, FeatureMatrix(fm.X, fm.feature_names))


def test_unknown_kind_and_hyperparameter():
    with pytest.raises(ValueError):
        train("svm", two_clusters())
    with pytest.raises(ValueError):
        train("rf", two_clusters(), {"trees": 3})


@pytest.mark.parametrize("kind", KINDS)
def test_scores_in_unit_interval(kind):
    m = train(kind, blobs(40), seed=3)
    rng = np.random.default_rng(9)
    X = rng.normal(0, 50, (200, 3))
    s = m.predict_proba(X)
    assert np.all((s >= 0) & (s <= 1))


@pytest.mark.parametrize("kind", KINDS)
def test_dimension_mismatch(kind):
    m = train(kind, blobs(20), seed=0)
    with pytest.raises(ValueError):
        m.predict_proba(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        predict_proba(m, np.zeros(4))


def test_single_sample_returns_float():
    m = train("gnb", blobs(20))
    s = predict_proba(m, np.zeros(3))
    assert isinstance(s, float)


def test_scaler_comes_from_training_rows_only():
    fm = blobs(30)
    tr = fm.subset(np.arange(0, 60, 2))
    m = train("lr", tr)
    ref = Standardizer.fit(tr.X)
    np.testing.assert_array_equal(m.scaler.mean, ref.mean)
    np.testing.assert_array_equal(m.scaler.scale, ref.scale)


# ---------------------------------------------------------------- per-kind behaviour


def test_knn_self_neighbor():
    fm = blobs(30, seed=4)
    m = train("knn", fm, {"k": 1})
    np.testing.assert_array_equal(m.predict_proba(fm.X), fm.labels)


def test_knn_distance_ties_follow_training_order():
    X = np.array([[-1.0], [1.0], [3.0]])
    knn = KNearestNeighbors(k=1).fit(X, np.array([1, 0, 0]))
    # query at 0 is equidistant from rows 0 and 1; row 0 wins
    assert knn.predict_proba(np.array([[0.0]]))[0] == 1.0
    knn = KNearestNeighbors(k=1).fit(X, np.array([0, 1, 0]))
    assert knn.predict_proba(np.array([[0.0]]))[0] == 0.0


def test_knn_fraction_of_neighbors():
    X = np.arange(6, dtype=float).reshape(-1, 1)
    knn = KNearestNeighbors(k=5).fit(X, np.array([1, 1, 0, 0, 0, 1]))
    assert knn.predict_proba(np.array([[0.0]]))[0] == pytest.approx(2 / 5)


def test_gnb_symmetry_point():
    X = np.array([[-1.0, -2.0], [-3.0, -1.0], [1.0, 2.0], [3.0, 1.0]])
    gnb = GaussianNB().fit(X, np.array([0, 0, 1, 1]))
    assert gnb.predict_proba(np.zeros((1, 2)))[0] == pytest.approx(0.5, abs=1e-12)


def test_gnb_variance_floor():
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
    gnb = GaussianNB().fit(X, np.array([0, 0, 1, 1]))
    s = gnb.predict_proba(X)
    assert np.all(np.isfinite(s))


def test_lr_zero_weights_is_half():
    lr = LogisticRegression(epochs=0).fit(np.ones((4, 2)), np.array([0, 1, 0, 1]))
    assert np.all(lr.weights == 0) and lr.bias == 0
    assert lr.predict_proba(np.array([[3.0, -7.0]]))[0] == 0.5


def test_rf_unanimity():
    fm = two_clusters()
    m = train("rf", fm, {"n_trees": 15}, seed=2)
    assert m.predict_proba(np.array([[100.0]]))[0] == 1.0
    assert m.predict_proba(np.array([[-100.0]]))[0] == 0.0


def test_rf_score_is_vote_fraction():
    fm = blobs(40, gap=1.0)
    m = train("rf", fm, {"n_trees": 7}, seed=5)
    Z = m.scaler.transform(fm.X)
    votes = np.mean([t.vote(Z) for t in m.estimator.trees], axis=0)
    np.testing.assert_array_equal(m.predict_proba(fm.X), votes)


# ---------------------------------------------------------------- tree internals


def _brute_stump(X, y):
    """Exact (rational) Gini search; ties go to the lowest feature, then lowest threshold."""
    best = None
    n, d = X.shape
    for j in range(d):
        values = np.unique(X[:, j])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = lo + (hi - lo) / 2
            left = X[:, j] <= thr
            nl, nr = int(left.sum()), int((~left).sum())
            pl, pr = int(y[left].sum()), int(y[~left].sum())
            cost = 2 * (Fraction(pl * (nl - pl), nl) + Fraction(pr * (nr - pr), nr))
            if best is None or cost < best[0]:
                best = (cost, j, thr)
    return best


@given(st.integers(0, 2**31), st.integers(4, 30), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_depth_one_tree_is_brute_force_stump(seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, (n, d)).astype(float)
    y = rng.integers(0, 2, n)
    best = _brute_stump(X, y)
    for engine in ("numpy", "numba"):
        tree = grow_tree(X, y, np.random.default_rng(0), max_depth=1, engine=engine)
        if best is None or y.min() == y.max():
            assert tree.n_nodes == 1
            continue
        assert tree.feature[0] == best[1]
        assert tree.threshold[0] == best[2]


def test_single_feature_split_search():
    cost, thr = best_split_on_feature(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0, 0, 1, 1]))
    assert cost == 0.0 and thr == 1.5
    assert best_split_on_feature(np.ones(4), np.array([0, 1, 0, 1])) is None


@given(st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_engines_agree(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(10, 200)), int(rng.integers(1, 6))
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + rng.normal(0, 0.8, n) > 0).astype(int)
    mtry = int(rng.integers(1, d + 1))
    a = grow_tree(X, y, np.random.default_rng(seed), max_features=mtry, engine="numpy")
    b = grow_tree(X, y, np.random.default_rng(seed), max_features=mtry, engine="numba")
    assert a.to_dict() == b.to_dict()


def test_tree_grows_pure_leaves():
    fm = blobs(50, gap=0.5, seed=2)
    tree = grow_tree(fm.X, fm.labels, np.random.default_rng(0))
    np.testing.assert_array_equal(tree.vote(fm.X), fm.labels)


# ---------------------------------------------------------------- persistence and determinism


@pytest.mark.parametrize("kind", KINDS)
def test_save_load_round_trip(tmp_path, kind):
    fm = blobs(30, gap=1.5)
    m = train(kind, fm, {"n_trees": 10} if kind == "rf" else None, seed=4, metadata={"note": "x"})
    m.save(tmp_path / "m.json")
    again = TrainedModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(again.predict_proba(fm.X), m.predict_proba(fm.X))
    assert again.dumps() == m.dumps()
    assert again.metadata == {"note": "x"}


def test_rf_seeded_training_is_bit_identical():
    fm = blobs(60, gap=1.0)
    a = train("rf", fm, {"n_trees": 100}, seed=11)
    b = train("rf", fm, {"n_trees": 100}, seed=11)
    assert a.dumps() == b.dumps()
    c = train("rf", fm, {"n_trees": 100}, seed=12)
    assert c.dumps() != a.dumps()


def test_newer_format_version_fails(tmp_path):
    m = train("lr", blobs(10))
    d = json.loads(m.dumps())
    d["format_version"] = FORMAT_VERSION + 1
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(ModelFormatError, match="version"):
        TrainedModel.load(tmp_path / "m.json")


def test_garbage_model_file(tmp_path):
    (tmp_path / "m.json").write_text("not json")
    with pytest.raises(ModelFormatError):
        TrainedModel.load(tmp_path / "m.json")


# ---------------------------------------------------------------- metrics


def test_perfect_classifier_metrics():
    m = metrics_from_counts(2, 0, 0, 2)
    assert (m.precision, m.recall, m.f1, m.accuracy) == (1.0, 1.0, 1.0, 1.0)


def test_hand_confusion_arithmetic():
    m = metrics_from_counts(tp=3, fp=2, fn=1, tn=4)
    assert m.precision == pytest.approx(0.6)
    assert m.recall == pytest.approx(0.75)
    assert m.f1 == pytest.approx(0.6667, abs=1e-4)
    assert m.accuracy == pytest.approx(0.7)


def test_published_f1_identity():
    # random forest column of the published comparison table
    assert round(f1_score(0.801, 0.894), 3) == 0.845


def test_zero_denominators():
    m = metrics_from_counts(0, 0, 0, 5)
    assert (m.precision, m.recall, m.f1, m.accuracy) == (0.0, 0.0, 0.0, 1.0)


@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
def test_f1_identity(tp, fp, fn, tn):
    if tp + fp + fn + tn == 0:
        return
    m = metrics_from_counts(tp, fp, fn, tn)
    p, r = m.precision, m.recall
    assert m.f1 == (0.0 if p + r == 0 else 2 * p * r / (p + r))
    assert m.accuracy == (tp + tn) / (tp + fp + fn + tn)
    for v in m.as_dict().values():
        assert 0 <= v <= 1


def test_strict_threshold_in_confusion():
    tp, fp, fn, tn = confusion_counts(np.array([1, 0]), np.array([0.5, 0.5]), 0.5)
    assert (tp, fp, fn, tn) == (0, 0, 1, 1)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.integers(0, 2**31), st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotonicity(scores, seed, t1, t2):
    lo, hi = sorted((t1, t2))
    scores = np.array(scores)
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    _, fp_lo, fn_lo, _ = confusion_counts(labels, scores, lo)
    _, fp_hi, fn_hi, _ = confusion_counts(labels, scores, hi)
    assert fp_hi <= fp_lo
    assert fn_hi >= fn_lo


def test_evaluate_rejects_empty():
    m = train("lr", blobs(10))
    with pytest.raises(ValueError):
        evaluate(m, FeatureMatrix(np.empty((0, 3)), m.feature_names, np.empty(0)))


# ---------------------------------------------------------------- cross-validation


@pytest.mark.parametrize("kind", KINDS)
def test_cv_on_separable_data(kind):
    res = cross_validate(kind, blobs(50, gap=10.0), k=5, hyperparams={"n_trees": 10} if kind == "rf" else None)
    assert len(res.folds) == 5 and sum(res.test_sizes) == 100
    assert res.mean["f1"] == 1.0


def test_cv_identical_folds_give_identical_metrics():
    # every fold sees the same class-conditional points
    X = np.tile(np.array([[0.0], [1.0], [0.2], [1.2]]), (5, 1))
    y = np.tile(np.array([0, 1, 0, 1]), 5)
    base = np.array([[0.0], [1.0]])
    X = np.vstack([np.repeat(base[:1], 5, 0), np.repeat(base[1:], 5, 0)])
    y = np.array([0] * 5 + [1] * 5)
    res = cross_validate("gnb", FeatureMatrix(X + np.zeros_like(X), ("x",), y), k=5)
    first = res.folds[0].as_dict()
    assert all(f.as_dict() == first for f in res.folds)


def test_cv_is_deterministic():
    fm = blobs(40, gap=1.0)
    a = cross_validate("rf", fm, 5, {"n_trees": 10}, seed=3)
    b = cross_validate("rf", fm, 5, {"n_trees": 10}, seed=3)
    assert a.folds == b.folds


def test_cv_errors_propagate():
    with pytest.raises(ValueError):
        cross_validate("lr", blobs(2), k=5)
    with pytest.raises(ValueError):
        cross_validate("lr", blobs(10), k=1)


def test_metrics_type_identity():
    m = EvalMetrics(0.5, 0.5, 0.5, 0.5, 1, 1, 1, 1)
    assert m.as_dict() == {"precision": 0.5, "recall": 0.5, "f1": 0.5, "accuracy": 0.5}
    assert not math.isnan(m.f1)
