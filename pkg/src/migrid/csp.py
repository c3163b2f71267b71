"""Common Spatial Patterns for two-class motor imagery."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_epochs

__all__ = [
    "DegenerateEpochError",
    "CspModel",
    "class_covariance",
    "mean_normalized_covariance",
    "fit_csp",
    "csp_features",
    "CSP",
]

RIDGE = 1e-10


class DegenerateEpochError(ValueError):
    """A spatially filtered epoch has zero variance."""


@dataclass(frozen=True)
class CspModel:
    """Spatial filters (rows) with their generalized eigenvalues."""

    filters: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_components(self) -> int:
        return self.filters.shape[0]

    @property
    def n_channels(self) -> int:
        return self.filters.shape[1]


def mean_normalized_covariance(trials) -> np.ndarray:
    """Average of per-trial ``X X^T / n_samples``, each scaled to unit trace."""
    trials = np.asarray(trials, dtype=float)
    if trials.ndim != 3 or trials.shape[0] == 0:
        raise ValueError("expected a non-empty (trials, channels, samples) array")
    if trials.shape[2] < 2:
        raise ValueError("each epoch needs at least 2 samples")
    covs = np.einsum("tcs,tds->tcd", trials, trials) / trials.shape[2]
    traces = np.trace(covs, axis1=1, axis2=2)
    if np.any(traces <= 0):
        raise DegenerateEpochError("trial with zero power cannot be trace-normalized")
    return (covs / traces[:, None, None]).mean(axis=0)


def class_covariance(epochs, label: int) -> np.ndarray:
    """Trace-normalized mean spatial covariance of the trials carrying ``label``.

    Parameters
    ----------
    epochs : EpochSet
    label : int

    Returns
    -------
    ndarray, shape (n_channels, n_channels)
        Symmetric PSD with unit trace.
    """
    mask = epochs.labels == label
    if not mask.any():
        raise ValueError(f"no trials with label {label}")
    return mean_normalized_covariance(epochs.data[mask])


def _check_symmetric(c, name):
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"{name} must be square, got shape {c.shape}")
    if not np.allclose(c, c.T, rtol=1e-10, atol=1e-12 * np.abs(c).max()):
        raise ValueError(f"{name} is not symmetric")
    return (c + c.T) / 2


def fit_csp(c_left, c_right, n_components: int = 4) -> CspModel:
    """Solve ``c_left w = lambda (c_left + c_right) w`` and keep the extremes.

    Returns ``n_components // 2`` filters with the largest eigenvalues (in
    decreasing order) followed by ``n_components // 2`` with the smallest (in
    increasing order). Each filter satisfies ``w^T (c_left + c_right) w = 1``
    and has its largest-magnitude entry positive. A ridge of ``1e-10`` times
    the mean composite eigenvalue is added when the composite's smallest
    eigenvalue falls at or below that level.
    """
    c_left = _check_symmetric(c_left, "c_left")
    c_right = _check_symmetric(c_right, "c_right")
    if c_left.shape != c_right.shape:
        raise ValueError("covariances differ in shape")
    n_channels = c_left.shape[0]
    if n_components % 2 or not 0 < n_components <= n_channels:
        raise ValueError(
            f"n_components must be even and in [2, {n_channels}], got {n_components}"
        )

    composite = c_left + c_right
    # repair only near-singular composites; an unconditional identity ridge
    # would break invariance under channel mixing
    floor = RIDGE * np.trace(composite) / n_channels
    if np.linalg.eigvalsh(composite)[0] <= floor:
        composite = composite + floor * np.eye(n_channels)
    try:
        eigvals, eigvecs = linalg.eigh(c_left, composite)
    except linalg.LinAlgError as exc:
        raise ValueError(f"composite covariance is singular: {exc}") from exc

    half = n_components // 2
    # eigh returns ascending eigenvalues
    order = np.r_[np.arange(n_channels - 1, n_channels - 1 - half, -1), np.arange(half)]
    filters = eigvecs[:, order].T
    peak = np.argmax(np.abs(filters), axis=1)
    signs = np.sign(filters[np.arange(len(order)), peak])
    filters = filters * signs[:, None]
    return CspModel(filters=filters, eigenvalues=np.clip(eigvals[order], 0.0, 1.0))


def csp_features(model: CspModel, epoch) -> np.ndarray:
    """Log mean power of each spatially filtered component.

    ``epoch`` may be a single (channels, samples) array or a stack of them;
    the output then has shape (n_components,) or (n_trials, n_components).
    """
    epoch = np.asarray(epoch, dtype=float)
    if epoch.shape[-2] != model.n_channels:
        raise ValueError(
            f"epoch has {epoch.shape[-2]} channels, filters expect {model.n_channels}"
        )
    projected = np.matmul(model.filters, epoch)
    power = np.mean(projected**2, axis=-1)
    if np.any(power <= 0):
        raise DegenerateEpochError("zero-variance spatial projection")
    return np.log(power)


class CSP(TransformerMixin, BaseEstimator):
    """Common Spatial Patterns transformer.

    Parameters
    ----------
    n_components : int, default=4
        Number of spatial filters, half from each end of the eigenvalue
        spectrum. Must be even.

    Attributes
    ----------
    classes_ : ndarray of shape (2,)
        The first class plays the "left" role in the eigenproblem.
    filters_ : ndarray of shape (n_components, n_channels)
    eigenvalues_ : ndarray of shape (n_components,)
    """

    def __init__(self, n_components=4):
        self.n_components = n_components

    def fit(self, X, y):
        X = check_epochs(X)
        y, self.classes_ = check_binary_labels(y, len(X))
        c_left = mean_normalized_covariance(X[y == 0])
        c_right = mean_normalized_covariance(X[y == 1])
        self.model_ = fit_csp(c_left, c_right, self.n_components)
        self.filters_ = self.model_.filters
        self.eigenvalues_ = self.model_.eigenvalues
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_epochs(X)
        return csp_features(self.model_, X)
