import numpy as np
import pytest

from dnstun.evaluation import (ConfusionCounts, EmptyEvaluation, EvaluationError, TooFewRows,
                               UnknownFeature, compute_metrics, cumulative_importance, evaluate,
                               evaluate_cross_env, prune_schema, rank_features, split_train_test,
                               train_count)
from dnstun.features import FEATURE_NAMES, DEFAULT_DROP, FeatureSchema, SchemaFingerprintMismatch
from dnstun.model import Dataset, ForestParams, train_knn, train_random_forest
from conftest import dominant_dataset
from oracles import exact_metrics


def test_worked_example():
    r = compute_metrics(ConfusionCounts(tp=5, tn=3, fp=1, fn=1))
    assert r.acc == 0.8
    assert r.pre == pytest.approx(5 / 6, abs=1e-15)
    assert r.rec == pytest.approx(5 / 6, abs=1e-15)
    assert r.f1 == pytest.approx(5 / 6, abs=1e-15)
    assert not r.degenerate


def test_random_matrices_against_fractions():
    rng = np.random.default_rng(0)
    for _ in range(200):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 1000, size=4))
        if tp + tn + fp + fn == 0:
            continue
        r = compute_metrics(ConfusionCounts(tp, tn, fp, fn))
        want = exact_metrics(tp, tn, fp, fn)
        for got, exact in zip((r.acc, r.pre, r.rec, r.f1), want):
            if exact is not None:
                assert abs(got - float(exact)) <= 1e-12


def test_f1_is_between_min_and_max():
    rng = np.random.default_rng(1)
    for _ in range(200):
        tp, tn, fp, fn = (int(v) for v in rng.integers(1, 500, size=4))
        r = compute_metrics(ConfusionCounts(tp, tn, fp, fn))
        assert min(r.pre, r.rec) - 1e-15 <= r.f1 <= max(r.pre, r.rec) + 1e-15


def test_degenerate_cases_are_flagged():
    r = compute_metrics(ConfusionCounts(tp=0, tn=10, fp=0, fn=0))
    assert r.acc == 1.0
    assert {"pre", "rec", "f1"} <= r.degenerate
    with pytest.raises(EmptyEvaluation):
        compute_metrics(ConfusionCounts())


def test_table_column_order():
    r = compute_metrics(ConfusionCounts(tp=90, tn=80, fp=10, fn=20))
    head, row = r.table("RF").splitlines()
    assert head.split()[1:] == ["ACC", "(%)", "REC", "(%)", "PRE", "(%)", "F1", "(%)"]
    assert row.split() == ["RF", "85.00", "81.82", "90.00", "85.71"]


@pytest.mark.parametrize("pre, rec, f1", [(0.926, 0.954, 0.94), (0.9992, 0.9223, 0.9592)])
def test_published_rows_are_self_consistent(pre, rec, f1):
    # Reported values are rounded, so the recomputed F1 only has to land within rounding.
    assert 2 * pre * rec / (pre + rec) == pytest.approx(f1, abs=0.005)


def test_train_count_rounding():
    assert train_count(100, 0.85) == 85
    assert train_count(7, 0.85) == 6
    assert train_count(10, 0.85) == 9  # 8.5 rounds up
    assert train_count(2, 0.99) == 1
    assert train_count(2, 0.01) == 1


def test_split_is_stratified_and_deterministic():
    X = np.arange(200, dtype=float).reshape(-1, 1)
    y = np.array([0] * 100 + [1] * 100)
    data = Dataset(X, y, FeatureSchema.from_names(["ip_length"]))
    tr, te = split_train_test(data, 0.85, seed=3)
    assert (tr.y == 0).sum() == 85 and (tr.y == 1).sum() == 85
    assert len(te) == 30
    assert set(tr.X[:, 0]).isdisjoint(te.X[:, 0])
    tr2, _ = split_train_test(data, 0.85, seed=3)
    assert np.array_equal(tr.X, tr2.X)
    tr3, _ = split_train_test(data, 0.85, seed=4)
    assert not np.array_equal(tr.X, tr3.X)


def test_split_rejections():
    data = Dataset(np.zeros((3, 1)), [0, 0, 1], FeatureSchema.from_names(["ip_length"]))
    with pytest.raises(TooFewRows):
        split_train_test(data)
    with pytest.raises(ValueError):
        split_train_test(data, 1.0)


def test_ranking_and_cumulative():
    rf = train_random_forest(dominant_dataset(400, seed=1), ForestParams(n_trees=20, seed=1))
    ranked = rank_features(rf)
    assert ranked[0][0] == FEATURE_NAMES[0]
    values = [v for _, v in ranked]
    assert values == sorted(values, reverse=True)
    assert cumulative_importance(ranked)[-1][1] == pytest.approx(1.0)


def test_ranking_needs_importances():
    data = dominant_dataset(50)
    with pytest.raises(EvaluationError):
        rank_features(train_knn(data, k=3))


def test_prune():
    full = [(n, 1 / 16) for n in FEATURE_NAMES]
    assert prune_schema(full, DEFAULT_DROP).width == 13
    assert prune_schema(full, []).width == 16
    assert prune_schema(FeatureSchema.full(), DEFAULT_DROP) == FeatureSchema.pruned()
    with pytest.raises(UnknownFeature):
        prune_schema(full, ["no_such_feature"])


def test_cross_env_on_home_data_matches_plain_evaluate(rf_env_a, pruned_split):
    _, test = pruned_split
    assert evaluate_cross_env(rf_env_a, test) == evaluate(rf_env_a, test)


def test_cross_env_schema_must_match(rf_env_a):
    wrong = Dataset(np.zeros((2, 16)), [0, 1], FeatureSchema.full())
    with pytest.raises(SchemaFingerprintMismatch):
        evaluate_cross_env(rf_env_a, wrong)
