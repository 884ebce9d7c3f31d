"""Forest training: split optimality, determinism, structure invariants."""

import numpy as np
import pytest

from twinscope.data import Dataset, impute
from twinscope.errors import ValidationError
from twinscope.features import FEATURE_NAMES, LabeledRecord
from twinscope.forest import (
    ForestConfig,
    train_forest,
    predict_proba,
)

from conftest import patient


def oracle_best_split(values, y, min_leaf):
    """Exhaustive best (gini, threshold) by plain loops; None if no valid cut.

    Mirrors the documented selection rule: candidate thresholds are
    midpoints between distinct adjacent sorted values, both children
    need at least min_leaf rows, first strict improvement wins so ties
    keep the lowest threshold.
    """
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    vs = [values[i] for i in order]
    ys = [y[i] for i in order]
    best = None
    for i in range(1, n):
        if vs[i] == vs[i - 1]:
            continue
        if i < min_leaf or n - i < min_leaf:
            continue
        left_pos = float(sum(ys[:i]))
        right_pos = float(sum(ys[i:]))
        left_n = float(i)
        right_n = float(n - i)
        pl = left_pos / left_n
        pr = right_pos / right_n
        gini_left = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
        gini_right = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
        weighted = (left_n * gini_left + right_n * gini_right) / n
        if best is None or weighted < best[0]:
            best = (weighted, 0.5 * (vs[i - 1] + vs[i]))
    return best


def oracle_choice(X, y, rows, candidates, min_leaf):
    """Best (feature, threshold) over candidates; lowest feature index wins ties."""
    best = None
    for f in candidates:
        found = oracle_best_split([X[r, f] for r in rows], [y[r] for r in rows], min_leaf)
        if found is None:
            continue
        gini, thr = found
        if best is None or gini < best[0]:
            best = (gini, f, thr)
    return best


def test_split_choices_match_exhaustive_oracle(train_test):
    train, _ = train_test
    X, y = train.matrix()
    audit = []
    train_forest(train, ForestConfig(n_trees=6, max_depth=4, seed=9), audit=audit)
    assert audit, "no internal nodes recorded"
    checked = 0
    for a in audit:
        if len(a.rows) > 50:
            continue
        best = oracle_choice(X, y, a.rows, a.candidates, 5)
        assert best is not None
        _, f, thr = best
        assert a.feature == f, f"node {a.node_id}: feature {a.feature} != oracle {f}"
        assert a.threshold == thr, f"node {a.node_id}: thr {a.threshold} != oracle {thr}"
        checked += 1
    assert checked >= 10


def test_audit_rows_are_original_indices(train_test):
    train, _ = train_test
    n = len(train)
    audit = []
    train_forest(train, ForestConfig(n_trees=2, max_depth=3, seed=1), audit=audit)
    roots = [a for a in audit if a.depth == 0]
    assert len(roots) == 2
    for a in roots:
        assert len(a.rows) == n  # full bootstrap, duplicates kept
        assert a.rows.min() >= 0 and a.rows.max() < n
        assert len(np.unique(a.rows)) < n  # a bootstrap nearly surely repeats rows
    for a in audit:
        assert len(a.candidates) == 3
        assert list(a.candidates) == sorted(a.candidates)


def test_training_is_deterministic(train_test):
    train, _ = train_test
    cfg = ForestConfig(n_trees=10, max_depth=5, seed=77)
    m1 = train_forest(train, cfg)
    m2 = train_forest(train, cfg)
    assert len(m1.trees) == 10
    for t1, t2 in zip(m1.trees, m2.trees):
        assert np.array_equal(t1.feature, t2.feature)
        assert np.array_equal(t1.threshold, t2.threshold)
        assert np.array_equal(t1.left, t2.left)
        assert np.array_equal(t1.right, t2.right)
        assert np.array_equal(t1.proba, t2.proba)
    m3 = train_forest(train, ForestConfig(n_trees=10, max_depth=5, seed=78))
    assert any(
        not np.array_equal(t1.feature, t3.feature) for t1, t3 in zip(m1.trees, m3.trees)
    )


def test_parallel_equals_sequential(train_test):
    train, _ = train_test
    cfg = ForestConfig(n_trees=8, max_depth=5, seed=5)
    seq = train_forest(train, cfg, parallel=False)
    par = train_forest(train, cfg, parallel=True)
    for t1, t2 in zip(seq.trees, par.trees):
        assert np.array_equal(t1.feature, t2.feature)
        assert np.array_equal(t1.threshold, t2.threshold)
        assert np.array_equal(t1.proba, t2.proba)


def test_leaf_probabilities_sum_to_one(small_forest):
    for tree in small_forest.trees:
        sums = tree.proba.sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-12)
        assert (tree.proba >= 0).all()


def test_leaves_respect_min_samples(train_test):
    train, _ = train_test
    X, y = train.matrix()
    cfg = ForestConfig(n_trees=3, max_depth=8, seed=13, min_samples_leaf=5)
    audit = []
    model = train_forest(train, cfg, audit=audit)
    for k, tree in enumerate(model.trees):
        root = next(a for a in audit if a.tree_index == k and a.depth == 0)
        rows = root.rows  # the tree's bootstrap sample as original indices
        # walk every bootstrap row to its leaf using the flat arrays
        counts = {}
        for r in rows:
            node = 0
            while tree.feature[node] != -1:
                if X[r, tree.feature[node]] <= tree.threshold[node]:
                    node = tree.left[node]
                else:
                    node = tree.right[node]
            counts[node] = counts.get(node, 0) + 1
        assert counts and min(counts.values()) >= cfg.min_samples_leaf


def test_batch_prediction_matches_single(small_forest, train_test):
    _, test = train_test
    X, _ = test.matrix()
    batch = small_forest.predict_proba_batch(X[:20])
    for i in range(20):
        single = predict_proba(small_forest, test.records[i].features)
        assert batch[i] == pytest.approx(single, abs=1e-15)
    assert (batch >= 0).all() and (batch <= 1).all()


def test_prediction_is_mean_of_tree_leaves(small_forest, train_test):
    _, test = train_test
    X, _ = test.matrix()
    x = X[0]
    per_tree = []
    for tree in small_forest.trees:
        node = 0
        while tree.feature[node] != -1:
            node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
        per_tree.append(tree.proba[node, 1])
    expected = float(np.mean(per_tree))
    got = small_forest.predict_proba_batch(X[:1])[0]
    assert got == pytest.approx(expected, abs=1e-12)


def test_forest_beats_majority(train_test, small_forest):
    train, test = train_test
    X, y = test.matrix()
    preds = (small_forest.predict_proba_batch(X) >= 0.5).astype(int)
    acc = (preds == y).mean()
    majority = max(y.mean(), 1.0 - y.mean())
    assert acc > majority - 0.02  # at minimum competitive with the base rate


def test_pure_node_stops_growing():
    # a one-feature dataset separable at alt=50 collapses to depth-1 trees
    recs = []
    for v in range(20, 40):
        recs.append(LabeledRecord(patient(alt=float(v)), 0))
    for v in range(60, 80):
        recs.append(LabeledRecord(patient(alt=float(v)), 1))
    ds = impute(Dataset.from_records(tuple(recs)))
    cfg = ForestConfig(n_trees=20, max_depth=6, seed=3, features_per_split=10)
    model = train_forest(ds, cfg)
    j = FEATURE_NAMES.index("alt")
    for tree in model.trees:
        assert tree.feature[0] == j
        assert 39.0 <= tree.threshold[0] <= 61.0
        left, right = tree.left[0], tree.right[0]
        assert tree.feature[left] == -1 and tree.feature[right] == -1
        assert tree.proba[left, 1] == 0.0
        assert tree.proba[right, 1] == 1.0


def test_config_validation():
    with pytest.raises(ValidationError):
        ForestConfig(n_trees=0).validate()
    with pytest.raises(ValidationError):
        ForestConfig(max_depth=0).validate()
    with pytest.raises(ValidationError):
        ForestConfig(min_samples_leaf=0).validate()
    with pytest.raises(ValidationError):
        ForestConfig(features_per_split=0).validate()
    with pytest.raises(ValidationError):
        ForestConfig(features_per_split=11).validate()
    ForestConfig().validate()


def test_training_stats_attached(small_forest, train_test):
    train, _ = train_test
    assert np.array_equal(small_forest.training_stats.mean, train.stats.mean)
