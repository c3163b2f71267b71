"""Binary linear discriminant analysis with Ledoit-Wolf shrinkage."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_features

__all__ = [
    "LdaModel",
    "ledoit_wolf_shrinkage",
    "shrink_covariance",
    "fit_lda",
    "predict_lda",
    "ShrinkageLDA",
]

GAMMA_FLOOR = 1e-6


@dataclass(frozen=True)
class LdaModel:
    weights: np.ndarray
    bias: float
    shrinkage: float
    class_means: tuple[np.ndarray, np.ndarray]
    priors: tuple[float, float]

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.weights):
            raise ValueError(
                f"feature dimension {X.shape[-1]} != model dimension {len(self.weights)}"
            )
        return X @ self.weights + self.bias


def ledoit_wolf_shrinkage(X) -> float:
    """Optimal shrinkage intensity toward ``(trace(S)/d) I``.

    ``X`` holds already-centred samples in rows; ``S = X^T X / n``. The
    estimate is ``sum_k ||x_k x_k^T - S||_F^2 / n^2`` divided by
    ``||S - mu I||_F^2``, clipped to [0, 1].
    """
    X = check_features(X)
    n, d = X.shape
    if n < 2:
        raise ValueError("Ledoit-Wolf shrinkage needs at least 2 samples")
    S = X.T @ X / n
    mu = np.trace(S) / d
    dispersion = np.sum((S - mu * np.eye(d)) ** 2)
    if dispersion == 0:
        return 0.0
    # sum_k ||x_k x_k^T - S||^2 = sum_k ||x_k||^4 - n ||S||^2
    sq_norms = np.sum(X**2, axis=1)
    spread = (np.sum(sq_norms**2) - n * np.sum(S**2)) / n**2
    return _clip_shrinkage(spread / dispersion)


def _clip_shrinkage(gamma: float) -> float:
    return float(min(max(gamma, 0.0), 1.0))


def shrink_covariance(S, gamma: float) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    d = S.shape[0]
    return (1 - gamma) * S + gamma * np.trace(S) / d * np.eye(d)


def fit_lda(features, labels, shrinkage="auto") -> LdaModel:
    """Fit a two-class shrinkage LDA on 0/1 labels.

    The pooled within-class covariance is shrunk with the Ledoit-Wolf
    intensity (``shrinkage="auto"``) or a fixed value in [0, 1]; priors are
    the label frequencies.
    """
    X = check_features(features)
    y = np.asarray(labels)
    if y.shape != (X.shape[0],):
        raise ValueError(f"expected {X.shape[0]} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    n1 = int(np.count_nonzero(y))
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("both classes must be present")

    mu0 = X[y == 0].mean(axis=0)
    mu1 = X[y == 1].mean(axis=0)
    # rows stay in input order so relabelling leaves Xc untouched
    Xc = X - np.where((y == 1)[:, None], mu1, mu0)
    n, d = X.shape
    S = Xc.T @ Xc / n
    if shrinkage == "auto":
        gamma = ledoit_wolf_shrinkage(Xc)
    else:
        gamma = _clip_shrinkage(float(shrinkage))

    delta = mu1 - mu0
    sigma = shrink_covariance(S, gamma)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            weights = linalg.solve(sigma, delta, assume_a="sym")
    except (linalg.LinAlgError, linalg.LinAlgWarning):
        gamma = max(gamma, GAMMA_FLOOR)
        weights = linalg.solve(shrink_covariance(S, gamma), delta, assume_a="sym")
    p0, p1 = n0 / n, n1 / n
    bias = -weights @ (mu0 + mu1) / 2 + (math.log(p1) - math.log(p0))
    return LdaModel(
        weights=weights,
        bias=float(bias),
        shrinkage=gamma,
        class_means=(mu0, mu1),
        priors=(p0, p1),
    )


def predict_lda(model: LdaModel, feature) -> np.ndarray | int:
    """Label 1 where the decision score is strictly positive, else 0."""
    score = model.decision_function(feature)
    if np.ndim(score) == 0:
        return int(score > 0)
    return (score > 0).astype(int)


class ShrinkageLDA(ClassifierMixin, BaseEstimator):
    """Two-class LDA with Ledoit-Wolf shrinkage.

    Parameters
    ----------
    shrinkage : "auto" or float, default="auto"
        ``"auto"`` picks the Ledoit-Wolf intensity; a float is used as is.

    Attributes
    ----------
    classes_ : ndarray of shape (2,)
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    shrinkage_ : float
    """

    def __init__(self, shrinkage="auto"):
        self.shrinkage = shrinkage

    def fit(self, X, y):
        X = check_features(X)
        y, self.classes_ = check_binary_labels(y, len(X))
        self.model_ = fit_lda(X, y, self.shrinkage)
        self.coef_ = self.model_.weights
        self.intercept_ = self.model_.bias
        self.shrinkage_ = self.model_.shrinkage
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(check_features(X))

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.classes_[predict_lda(self.model_, check_features(X))]
