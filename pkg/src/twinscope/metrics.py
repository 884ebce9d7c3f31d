"""Model evaluation: accuracy, confusion counts, rank AUC, learning curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, SplitSpec, split
from .errors import ValidationError
from .forest import ForestConfig, train_forest


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: tuple[tuple[int, int], tuple[int, int]]  # [[tn, fp], [fn, tp]]
    auc: float
    n_test: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": [list(self.confusion[0]), list(self.confusion[1])],
            "auc": self.auc,
            "n_test": self.n_test,
        }


@dataclass(frozen=True)
class LearningCurvePoint:
    train_size: int
    train_accuracy: float
    validation_accuracy: float


def _rank_auc(scores: np.ndarray, y: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for ties; 0.5 when degenerate."""
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate_model(model, test: Dataset, threshold: float = 0.5) -> EvalReport:
    """Accuracy/confusion at the threshold plus rank AUC on the test set."""
    if len(test) == 0:
        raise ValidationError("test set is empty")
    X, y = test.matrix()
    scores = np.asarray(model.predict_proba_batch(X), dtype=float)
    pred = (scores >= threshold).astype(int)
    tn = int(((pred == 0) & (y == 0)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    tp = int(((pred == 1) & (y == 1)).sum())
    return EvalReport(
        accuracy=float((pred == y).mean()),
        confusion=((tn, fp), (fn, tp)),
        auc=_rank_auc(scores, y),
        n_test=len(y),
    )


def learning_curve(
    ds: Dataset,
    cfg: ForestConfig,
    fractions: list[float],
    spec: SplitSpec | None = None,
) -> list[LearningCurvePoint]:
    """Accuracy as a function of training-set size.

    The dataset is split once (spec defaults to an 80-20 stratified split
    seeded by cfg.seed); training subsets are prefixes of a seeded shuffle
    of the training split, restored to their original record order so the
    1.0 fraction reproduces the standalone full-data run exactly.
    """
    if not fractions:
        raise ValidationError("fractions must be nonempty")
    if any(not (0.0 < f <= 1.0) for f in fractions):
        raise ValidationError("fractions must lie in (0, 1]")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValidationError("fractions must be strictly increasing")
    if spec is None:
        spec = SplitSpec(seed=cfg.seed)
    from .data import Dataset as _DS, impute

    train, test = split(ds, spec)
    train = impute(train)
    test = impute(test)
    shuffled = np.random.default_rng(cfg.seed).permutation(len(train))
    points = []
    for frac in fractions:
        k = int(round(frac * len(train)))
        if k < 10:
            raise ValidationError(f"fraction {frac} yields only {k} training records (< 10)")
        subset_idx = np.sort(shuffled[:k])
        subset = _DS(
            records=tuple(train.records[i] for i in subset_idx),
            stats=train.stats,
        )
        model = train_forest(subset, cfg)
        points.append(
            LearningCurvePoint(
                train_size=k,
                train_accuracy=evaluate_model(model, subset).accuracy,
                validation_accuracy=evaluate_model(model, test).accuracy,
            )
        )
    return points


def curve_to_csv(points: list[LearningCurvePoint]) -> str:
    lines = ["train_size,train_accuracy,validation_accuracy"]
    for p in points:
        lines.append(f"{p.train_size},{p.train_accuracy!r},{p.validation_accuracy!r}")
    return "\n".join(lines) + "\n"
