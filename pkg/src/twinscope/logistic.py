"""L2-regularized logistic regression on standardized features.

Used as the reference model for partial-dependence analysis. Trained by
full-batch gradient descent with step halving, so the loss sequence is
non-increasing by construction. The bias term is not penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import TrainingError
from .features import PatientFeatures


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray  # (d+1,), bias last
    mean: np.ndarray  # per-feature standardization mean
    std: np.ndarray  # per-feature standardization std (> 0)

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Z = (X - self.mean) / self.std
        z = Z @ self.weights[:-1] + self.weights[-1]
        return _sigmoid(z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(w: np.ndarray, Z: np.ndarray, y: np.ndarray, l2: float):
    """Mean negative log-likelihood + 0.5*l2*||w||^2 (bias excluded), with gradient.

    Z already carries the bias column of ones as its last column.
    """
    z = Z @ w
    # log(1 + exp(z)) - y*z, computed stably
    nll = np.mean(np.logaddexp(0.0, z) - y * z)
    penalty_w = w.copy()
    penalty_w[-1] = 0.0
    loss = nll + 0.5 * l2 * float(penalty_w @ penalty_w)
    grad = Z.T @ (_sigmoid(z) - y) / len(y) + l2 * penalty_w
    return loss, grad


def train_logistic(
    train: Dataset, l2: float = 1e-4, iters: int = 2000, lr: float = 0.1
) -> LogisticModel:
    """Fit by gradient descent; steps that would increase the loss are
    retried at half the rate, so the recorded loss never increases."""
    X, y = train.matrix()
    if not np.isfinite(X).all():
        raise TrainingError("training data contains missing values; impute first")
    if len(np.unique(y)) < 2:
        raise TrainingError("training data contains a single class")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Z = np.column_stack([(X - mean) / std, np.ones(len(X))])
    yf = y.astype(float)

    w = np.zeros(Z.shape[1])
    loss, grad = loss_and_grad(w, Z, yf, l2)
    step = lr
    for _ in range(iters):
        accepted = False
        for _ in range(60):
            w_new = w - step * grad
            loss_new, grad_new = loss_and_grad(w_new, Z, yf, l2)
            if loss_new <= loss:
                w, loss, grad = w_new, loss_new, grad_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return LogisticModel(weights=w, mean=mean, std=std)


def predict_proba(model: LogisticModel, p: PatientFeatures) -> float:
    return float(model.predict_proba_batch(p.to_array()[None, :])[0])
