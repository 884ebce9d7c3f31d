"""Random forest classifier grown from scratch on bootstrap resamples.

Trees are stored as flat arrays so prediction can route whole batches in a
few vectorized passes. Training is fully deterministic: each tree owns an
RNG keyed by (config seed, tree index), so any execution order (including
parallel) yields the identical forest.

Split search follows CART: candidate thresholds are midpoints between
consecutive distinct sorted values, the best split minimizes weighted Gini
impurity, and ties break toward the lowest feature index then the lowest
threshold.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureStats
from .errors import TrainingError, ValidationError
from .features import N_FEATURES, PatientFeatures

_LEAF = -1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 8
    min_samples_leaf: int = 5
    features_per_split: int = 3  # floor(sqrt(10))
    seed: int = 0

    def validate(self) -> "ForestConfig":
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1", field="n_trees")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1", field="max_depth")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1", field="min_samples_leaf")
        if not 1 <= self.features_per_split <= N_FEATURES:
            raise ValidationError(
                f"features_per_split must be in [1, {N_FEATURES}]", field="features_per_split"
            )
        return self


@dataclass(frozen=True)
class Tree:
    """Flat binary tree. feature[i] == -1 marks a leaf; proba[i] holds
    (negative, positive) class proportions at node i. Routing sends
    x[feature] <= threshold to the left child."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    proba: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True)
class SplitAudit:
    """Training-time record of one chosen split, for oracle verification."""

    tree_index: int
    node_id: int
    depth: int
    rows: np.ndarray  # indices into the original training matrix (bootstrap duplicates kept)
    candidates: tuple[int, ...]  # feature indices offered to the split
    feature: int
    threshold: float


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    config: ForestConfig
    training_stats: FeatureStats

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        """Positive-class probability for each row of X (n, 10)."""
        X = np.asarray(X, dtype=float)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.proba[_apply(tree, X), 1]
        return total / len(self.trees)


def predict_proba(model: ForestModel, p: PatientFeatures) -> float:
    """Mean over trees of the reached leaf's positive-class proportion."""
    return float(model.predict_proba_batch(p.to_array()[None, :])[0])


def _apply(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf index for every row, by iterative level-wise routing."""
    idx = np.zeros(len(X), dtype=np.int32)
    while True:
        feat = tree.feature[idx]
        active = feat != _LEAF
        if not active.any():
            return idx
        rows = np.nonzero(active)[0]
        f = feat[rows]
        go_left = X[rows, f] <= tree.threshold[idx[rows]]
        idx[rows] = np.where(go_left, tree.left[idx[rows]], tree.right[idx[rows]])


def _best_split_for_feature(values: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (weighted_gini, threshold) splitting `values`, or None."""
    n = len(values)
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ys = y[order]
    cum_pos = np.cumsum(ys)
    total_pos = cum_pos[-1]
    i = np.arange(1, n)
    valid = (vs[1:] != vs[:-1]) & (i >= min_leaf) & (n - i >= min_leaf)
    if not valid.any():
        return None
    i = i[valid]
    left_pos = cum_pos[i - 1]
    left_n = i.astype(float)
    right_n = float(n) - left_n
    right_pos = total_pos - left_pos
    pl = left_pos / left_n
    pr = right_pos / right_n
    gini_left = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
    gini_right = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
    weighted = (left_n * gini_left + right_n * gini_right) / n
    k = int(np.argmin(weighted))  # first minimum -> lowest threshold
    thr = 0.5 * (vs[i[k] - 1] + vs[i[k]])
    return float(weighted[k]), float(thr)


class _TreeBuilder:
    def __init__(self, X, y, cfg: ForestConfig, rng, tree_index: int, audit):
        self.X = X
        self.y = y
        self.cfg = cfg
        self.rng = rng
        self.tree_index = tree_index
        self.audit = audit
        self.boot: np.ndarray | None = None
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.proba: list[tuple[float, float]] = []

    def _new_node(self, rows) -> int:
        node = len(self.feature)
        pos = float(self.y[rows].sum())
        n = float(len(rows))
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.proba.append(((n - pos) / n, pos / n))
        return node

    def grow(self, rows: np.ndarray, depth: int) -> int:
        node = self._new_node(rows)
        n = len(rows)
        pos = int(self.y[rows].sum())
        if depth >= self.cfg.max_depth or pos == 0 or pos == n or n < 2 * self.cfg.min_samples_leaf:
            return node
        candidates = np.sort(
            self.rng.choice(N_FEATURES, size=self.cfg.features_per_split, replace=False)
        )
        best = None  # (gini, feature, threshold)
        for f in candidates:
            found = _best_split_for_feature(self.X[rows, f], self.y[rows], self.cfg.min_samples_leaf)
            if found is None:
                continue
            gini, thr = found
            if best is None or gini < best[0]:
                best = (gini, int(f), thr)
        if best is None:
            return node
        _, f, thr = best
        if self.audit is not None:
            self.audit.append(
                SplitAudit(
                    tree_index=self.tree_index,
                    node_id=node,
                    depth=depth,
                    rows=self.boot[rows].copy(),
                    candidates=tuple(int(c) for c in candidates),
                    feature=f,
                    threshold=thr,
                )
            )
        go_left = self.X[rows, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.grow(rows[go_left], depth + 1)
        self.right[node] = self.grow(rows[~go_left], depth + 1)
        return node

    def build(self) -> Tree:
        n = len(self.X)
        boot = self.rng.integers(0, n, size=n)
        self.boot = boot
        self.X = self.X[boot]
        self.y = self.y[boot]
        self.grow(np.arange(n), depth=0)
        return Tree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            proba=np.array(self.proba, dtype=float),
        )


def _tree_rng(seed: int, tree_index: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tree_index,)))


def train_forest(
    train: Dataset,
    cfg: ForestConfig,
    parallel: bool = False,
    audit: list | None = None,
) -> ForestModel:
    """Grow cfg.n_trees trees on bootstrap resamples of the training data.

    `audit`, when a list, collects a SplitAudit per internal node (rows
    are original-matrix indices with bootstrap duplicates kept). `parallel`
    trains trees on a thread pool; results are identical to sequential
    training.
    """
    cfg.validate()
    X, y = train.matrix()
    if not np.isfinite(X).all():
        raise TrainingError("training data contains missing values; impute first")
    if len(np.unique(y)) < 2:
        raise TrainingError("training data contains a single class")

    def build(t: int) -> tuple[Tree, list]:
        local_audit: list | None = [] if audit is not None else None
        tree = _TreeBuilder(X, y, cfg, _tree_rng(cfg.seed, t), t, local_audit).build()
        return tree, local_audit or []

    if parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(build, range(cfg.n_trees)))
    else:
        results = [build(t) for t in range(cfg.n_trees)]
    if audit is not None:
        for _, entries in results:
            audit.extend(entries)
    return ForestModel(trees=tuple(t for t, _ in results), config=cfg, training_stats=train.stats)
