"""Stratified cross-validation of the CSP -> LDA pipeline."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone
from sklearn.pipeline import Pipeline, make_pipeline

from .csp import CSP
from .lda import ShrinkageLDA

__all__ = [
    "CvSummary",
    "make_csp_lda",
    "stratified_kfold",
    "accuracy",
    "cohen_kappa",
    "cross_validate_combination",
]

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
DEFAULT_FOLDS = 10


def make_csp_lda(n_components: int = 4) -> Pipeline:
    return make_pipeline(CSP(n_components=n_components), ShrinkageLDA())


def stratified_kfold(labels, k: int, seed: int = DEFAULT_SEED) -> list[np.ndarray]:
    """Split trial indices into ``k`` disjoint, class-stratified test sets.

    Each class is shuffled with a generator seeded by ``seed`` and dealt to the
    folds round-robin; the dealing continues across classes so fold sizes
    differ by at most one. Returned index arrays are sorted.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of trials ({n})")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        for j, idx in enumerate(members):
            folds[(offset + j) % k].append(idx)
        offset = (offset + len(members)) % k
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def _check_pair(preds, truth):
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if preds.size == 0:
        raise ValueError("empty prediction vector")
    return preds, truth


def accuracy(preds, truth) -> float:
    preds, truth = _check_pair(preds, truth)
    return float(np.mean(preds == truth))


def cohen_kappa(preds, truth) -> float:
    """Chance-corrected agreement; 0 when chance agreement is already perfect.

    Computed from integer counts, so the result is the correctly rounded
    value of the exact rational.
    """
    preds, truth = _check_pair(preds, truth)
    n = preds.size
    agree = int(np.count_nonzero(preds == truth))
    # n^2 * p_e as an integer
    chance = sum(
        int(np.count_nonzero(preds == c)) * int(np.count_nonzero(truth == c))
        for c in np.union1d(preds, truth)
    )
    if chance == n * n:
        return 0.0
    return (n * agree - chance) / (n * n - chance)


@dataclass(frozen=True)
class CvSummary:
    accuracy_mean: float
    accuracy_std: float
    kappa_mean: float
    kappa_std: float
    n_folds: int
    per_fold: tuple[tuple[float, float], ...]
    skipped_folds: tuple[int, ...] = ()
    estimators: tuple = field(default=(), compare=False, repr=False)

    @classmethod
    def from_folds(cls, per_fold, skipped=(), estimators=()):
        """Summarise (accuracy, kappa) pairs; std uses divisor ``len(per_fold)``."""
        if not per_fold:
            nan = float("nan")
            return cls(nan, nan, nan, nan, 0, (), tuple(skipped), tuple(estimators))
        scores = np.array(per_fold, dtype=float)
        return cls(
            accuracy_mean=float(scores[:, 0].mean()),
            accuracy_std=float(scores[:, 0].std()),
            kappa_mean=float(scores[:, 1].mean()),
            kappa_std=float(scores[:, 1].std()),
            n_folds=len(per_fold),
            per_fold=tuple((float(a), float(c)) for a, c in per_fold),
            skipped_folds=tuple(skipped),
            estimators=tuple(estimators),
        )


def cross_validate_combination(
    epochs,
    k: int = DEFAULT_FOLDS,
    seed: int = DEFAULT_SEED,
    n_components: int = 4,
    return_estimators: bool = False,
) -> CvSummary:
    """Cross-validated accuracy and kappa of CSP + shrinkage LDA on one epoch set.

    CSP and LDA are refit on the training trials of every fold. Folds whose
    training side lacks a class are skipped and listed in
    ``CvSummary.skipped_folds``.
    """
    X, y = epochs.data, epochs.labels
    if len(np.unique(y)) < 2:
        raise ValueError("epochs must contain both labels")
    template = make_csp_lda(n_components)
    per_fold, skipped, fitted = [], [], []
    all_idx = np.arange(len(y))
    for i, test in enumerate(stratified_kfold(y, k, seed)):
        train = np.setdiff1d(all_idx, test, assume_unique=True)
        if len(np.unique(y[train])) < 2:
            logger.warning("fold %d skipped: training trials lack a class", i)
            skipped.append(i)
            continue
        model = clone(template).fit(X[train], y[train])
        preds = model.predict(X[test])
        per_fold.append((accuracy(preds, y[test]), cohen_kappa(preds, y[test])))
        if return_estimators:
            fitted.append(model)
    return CvSummary.from_folds(per_fold, skipped, fitted)
