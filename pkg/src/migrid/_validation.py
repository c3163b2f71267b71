"""Input checks shared by the estimators."""
import numpy as np


def check_epochs(X):
    """Return ``X`` as a float (trials, channels, samples) array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise ValueError(
            f"expected epochs of shape (n_trials, n_channels, n_samples), got {X.shape}"
        )
    if X.shape[0] == 0:
        raise ValueError("no trials")
    if not np.all(np.isfinite(X)):
        raise ValueError("epochs contain NaN or infinity")
    return X


def check_features(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, np.newaxis]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or infinity")
    return X


def check_binary_labels(y, n_samples):
    """Encode ``y`` as 0/1 and return ``(encoded, classes)``.

    Raises if there are not exactly two classes.
    """
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n_samples:
        raise ValueError(f"expected {n_samples} labels, got shape {y.shape}")
    classes, encoded = np.unique(y, return_inverse=True)
    if len(classes) != 2:
        raise ValueError(f"need exactly two classes, got {len(classes)}")
    return encoded, classes
