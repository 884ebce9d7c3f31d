"""Model-agnostic explanations: local weighted surrogates and partial dependence.

The surrogate perturbs the instance's neighborhood by sampling each
feature independently from the training marginals (gender from its
empirical rate), weights samples by a Gaussian kernel on standardized
Euclidean distance, and fits a weighted ridge regression of the model's
probabilities on the standardized features. Coefficients are the signed
per-feature contributions; weighted R-squared is the local fidelity.

Partial dependence sweeps one feature over a percentile-clipped grid and
averages the model's prediction across all records at each grid value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureStats
from .errors import ExplainError, ValidationError
from .features import FEATURE_NAMES, GENDER_INDEX, N_FEATURES, PatientFeatures, check_feature_name


def as_predict_fn(model):
    """Accept a ForestModel/LogisticModel or any f(X) -> probabilities."""
    if callable(model) and not hasattr(model, "predict_proba_batch"):
        return model
    return model.predict_proba_batch


@dataclass(frozen=True)
class SurrogateConfig:
    n_samples: int = 5000
    kernel_width: float | None = None  # default 0.75 * sqrt(d)
    ridge_lambda: float = 1e-3
    seed: int = 0
    discretize: bool = False

    def validate(self) -> "SurrogateConfig":
        if self.n_samples < 100:
            raise ValidationError("n_samples must be >= 100", field="n_samples")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValidationError("kernel_width must be > 0", field="kernel_width")
        if self.ridge_lambda < 0:
            raise ValidationError("ridge_lambda must be >= 0", field="ridge_lambda")
        return self

    @property
    def effective_kernel_width(self) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(N_FEATURES)


@dataclass(frozen=True)
class Explanation:
    instance: PatientFeatures
    prediction: float
    contributions: np.ndarray  # (d,) signed, standardized-coefficient scale
    intercept: float
    local_fidelity: float

    def contribution(self, feature: str) -> float:
        return float(self.contributions[FEATURE_NAMES.index(check_feature_name(feature))])

    def as_dict(self) -> dict:
        return {
            "instance": self.instance.as_dict(),
            "prediction": self.prediction,
            "contributions": {n: float(v) for n, v in zip(FEATURE_NAMES, self.contributions)},
            "intercept": self.intercept,
            "local_fidelity": self.local_fidelity,
        }


def _safe_std(std: np.ndarray) -> np.ndarray:
    return np.where(std > 0, std, 1.0)


def _sample_neighborhood(stats: FeatureStats, n: int, rng) -> np.ndarray:
    X = np.empty((n, N_FEATURES))
    for j in range(N_FEATURES):
        if j == GENDER_INDEX:
            rate = float(stats.mean[j])
            X[:, j] = (rng.random(n) < rate).astype(float)
        else:
            X[:, j] = rng.normal(stats.mean[j], stats.std[j], n)
    return X


def _quartile_edges(stats: FeatureStats, j: int) -> np.ndarray:
    return np.array([stats.min[j], stats.q1[j], stats.median[j], stats.q3[j], stats.max[j]])


def _bin_of(edges: np.ndarray, v: float) -> int:
    return int(np.clip(np.searchsorted(edges[1:-1], v, side="right"), 0, 3))


def weighted_ridge(A: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float) -> np.ndarray:
    """Solve the weighted ridge normal equations; the last column of A is
    the intercept and is not penalized."""
    Aw = A * w[:, None]
    gram = A.T @ Aw
    penalty = np.eye(A.shape[1]) * lam
    penalty[-1, -1] = 0.0
    return np.linalg.solve(gram + penalty, Aw.T @ y)


def ridge_gradient_norm(A, y, w, lam, beta) -> float:
    """Relative norm of the ridge objective gradient at beta (0 at the optimum)."""
    penalty_beta = beta.copy()
    penalty_beta[-1] = 0.0
    grad = 2.0 * (A.T @ (w * (A @ beta - y)) + lam * penalty_beta)
    scale = max(1.0, float(np.linalg.norm(2.0 * A.T @ (w * y))))
    return float(np.linalg.norm(grad)) / scale


def explain_instance(
    model, instance: PatientFeatures, train_stats: FeatureStats, cfg: SurrogateConfig
) -> Explanation:
    """Fit a local weighted linear surrogate around one instance.

    Deterministic given cfg.seed. Raises ExplainError when the model
    returns non-finite probabilities or when every sample weight
    underflows (the advice then is to enlarge kernel_width).
    """
    cfg.validate()
    predict = as_predict_fn(model)
    rng = np.random.default_rng(cfg.seed)
    x0 = instance.to_array()
    if not np.isfinite(x0).all():
        raise ValidationError("instance has missing values; impute first")

    X = _sample_neighborhood(train_stats, cfg.n_samples, rng)
    std = _safe_std(train_stats.std)
    Z = (X - train_stats.mean) / std
    z0 = (x0 - train_stats.mean) / std

    if cfg.discretize:
        design = np.empty_like(Z)
        for j in range(N_FEATURES):
            if j == GENDER_INDEX:
                design[:, j] = (X[:, j] == x0[j]).astype(float)
                continue
            edges = _quartile_edges(train_stats, j)
            bins = np.array([_bin_of(edges, v) for v in X[:, j]])
            design[:, j] = (bins == _bin_of(edges, x0[j])).astype(float)
        dist_sq = ((design - 1.0) ** 2).sum(axis=1)
    else:
        design = Z
        dist_sq = ((Z - z0) ** 2).sum(axis=1)

    kw = cfg.effective_kernel_width
    weights = np.exp(-dist_sq / (kw * kw))
    if not np.isfinite(weights).all() or weights.max() <= 0.0 or weights.sum() < 1e-200:
        raise ExplainError(
            "all neighborhood weights vanished; increase kernel_width "
            f"(currently {kw:g})"
        )

    y = np.asarray(predict(X), dtype=float)
    pred0 = predict(x0[None, :])
    if not (np.isfinite(y).all() and np.isfinite(pred0).all()):
        raise ExplainError("model returned a non-finite probability")

    A = np.column_stack([design, np.ones(cfg.n_samples)])
    beta = weighted_ridge(A, y, weights, cfg.ridge_lambda)
    fitted = A @ beta
    wsum = weights.sum()
    y_bar = float(weights @ y / wsum)
    ss_tot = float(weights @ (y - y_bar) ** 2)
    if ss_tot < 1e-18:
        fidelity = 1.0  # constant target: the surrogate is exact
    else:
        ss_res = float(weights @ (y - fitted) ** 2)
        fidelity = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return Explanation(
        instance=instance,
        prediction=float(pred0[0]),
        contributions=beta[:N_FEATURES].copy(),
        intercept=float(beta[-1]),
        local_fidelity=fidelity,
    )


def aggregate_explanations(explanations: list[Explanation]) -> list[tuple[str, float]]:
    """Rank features by mean absolute contribution (ties keep feature order)."""
    if not explanations:
        raise ValidationError("need at least one explanation")
    mean_abs = np.mean([np.abs(e.contributions) for e in explanations], axis=0)
    order = sorted(range(N_FEATURES), key=lambda j: (-mean_abs[j], j))
    return [(FEATURE_NAMES[j], float(mean_abs[j])) for j in order]


@dataclass(frozen=True)
class PdpCurve:
    feature: str
    grid: np.ndarray  # strictly ascending
    pdp: np.ndarray  # mean prediction at each grid value

    @property
    def range_effect(self) -> float:
        return float(self.pdp.max() - self.pdp.min())

    def as_dict(self) -> dict:
        return {
            "feature": self.feature,
            "grid": [float(v) for v in self.grid],
            "pdp": [float(v) for v in self.pdp],
            "range_effect": self.range_effect,
        }

    def to_csv(self) -> str:
        lines = ["grid,pdp"]
        for g, p in zip(self.grid, self.pdp):
            lines.append(f"{float(g)!r},{float(p)!r}")
        return "\n".join(lines) + "\n"


def pdp(
    model,
    ds: Dataset,
    feature: str,
    grid_size: int = 50,
    clip: tuple[float, float] = (1.0, 99.0),
) -> PdpCurve:
    """Partial dependence of the model on one feature.

    The grid spans the clip percentiles of the feature in ds (gender uses
    its exact support {0, 1}); each grid value is substituted into every
    record and the predictions averaged.
    """
    j = FEATURE_NAMES.index(check_feature_name(feature))
    if len(ds) == 0:
        raise ValidationError("dataset is empty")
    if grid_size < 2:
        raise ValidationError("grid_size must be >= 2", field="grid_size")
    predict = as_predict_fn(model)
    X, _ = ds.matrix()
    if not np.isfinite(X).all():
        raise ValidationError("dataset has missing values; impute first")
    col = X[:, j]
    if feature == "gender":
        grid = np.array([0.0, 1.0])
    else:
        lo, hi = np.percentile(col, list(clip))
        if lo == hi:
            warnings.warn(f"feature {feature} is constant in the clip range; single-point curve")
            grid = np.array([lo])
        else:
            grid = np.linspace(lo, hi, grid_size)
    n = len(X)
    stacked = np.repeat(X, len(grid), axis=0)
    stacked[:, j] = np.tile(grid, n)
    preds = np.asarray(predict(stacked), dtype=float).reshape(n, len(grid))
    return PdpCurve(feature=feature, grid=grid, pdp=preds.mean(axis=0))


def pdp_flatness(curve: PdpCurve) -> float:
    """max - min of the curve; the gender-flatness statistic."""
    return curve.range_effect
