import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.covariance import ledoit_wolf_shrinkage as sk_ledoit_wolf_shrinkage

from migrid.lda import (
    ShrinkageLDA,
    _clip_shrinkage,
    fit_lda,
    ledoit_wolf_shrinkage,
    predict_lda,
    shrink_covariance,
)

# fixed, class-centred 6x2 sample set
SAMPLES_6x2 = np.array(
    [
        [0.5, -1.2],
        [-0.3, 0.8],
        [1.1, 0.4],
        [-1.3, 0.0],
        [0.2, 1.5],
        [-0.2, -1.5],
    ]
)


def _textbook_shrinkage(X):
    """Ledoit-Wolf (2004) written out term by term with explicit loops."""
    n, d = X.shape
    S = np.zeros((d, d))
    for x in X:
        S += np.outer(x, x)
    S /= n
    m = np.trace(S) / d
    d2 = 0.0
    for i in range(d):
        for j in range(d):
            d2 += (S[i, j] - (m if i == j else 0.0)) ** 2
    b2_bar = 0.0
    for x in X:
        dev = np.outer(x, x) - S
        b2_bar += float(np.sum(dev * dev))
    b2_bar /= n**2
    return min(b2_bar, d2) / d2


def test_shrinkage_matches_textbook_oracle():
    assert ledoit_wolf_shrinkage(SAMPLES_6x2) == pytest.approx(_textbook_shrinkage(SAMPLES_6x2), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 40), d=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_shrinkage_matches_oracles_on_random_data(n, d, seed):
    X = np.random.default_rng(seed).standard_normal((n, d)) @ np.diag(np.arange(1, d + 1))
    gamma = ledoit_wolf_shrinkage(X)
    assert 0.0 <= gamma <= 1.0
    if d > 1:
        assert gamma == pytest.approx(_textbook_shrinkage(X), abs=1e-10)
        assert gamma == pytest.approx(sk_ledoit_wolf_shrinkage(X, assume_centered=True), abs=1e-10)


def test_scaled_identity_covariance_is_left_unchanged():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    S = X.T @ X / len(X)
    np.testing.assert_allclose(S, 0.5 * np.eye(2))
    for gamma in (0.0, 0.3, ledoit_wolf_shrinkage(X), 1.0):
        np.testing.assert_allclose(shrink_covariance(S, gamma), S, atol=1e-15)


def test_clamping():
    assert _clip_shrinkage(1.3) == 1.0
    assert _clip_shrinkage(-0.2) == 0.0
    # raw estimate for this pair is 17/9
    X = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert ledoit_wolf_shrinkage(X) == 1.0


def test_shrinkage_needs_two_samples():
    with pytest.raises(ValueError, match="at least 2"):
        ledoit_wolf_shrinkage(np.ones((1, 3)))


def test_one_dimensional_threshold_at_midpoint():
    x = np.array([-1.0, 0.0, 1.0, 1.0, 2.0, 3.0])[:, None]
    model = fit_lda(x, [0, 0, 0, 1, 1, 1])
    # threshold w * t + b = 0 sits exactly at the midpoint of the means
    assert -model.bias / model.weights[0] == 1.0
    assert predict_lda(model, np.array([1.0])) == 0
    assert predict_lda(model, np.array([1.0 + 1e-9])) == 1


def test_label_swap_negates_model():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((37, 4))
    y = (rng.random(37) < 0.4).astype(int)
    X[y == 1] += 0.7
    a = fit_lda(X, y)
    b = fit_lda(X, 1 - y)
    np.testing.assert_array_equal(b.weights, -a.weights)
    assert b.bias == -a.bias
    assert a.shrinkage == b.shrinkage


def test_monte_carlo_weights_match_analytic_discriminant():
    rng = np.random.default_rng(1)
    sigma = np.array([[1.0, 0.6], [0.6, 2.0]])
    mu0, mu1 = np.array([0.0, 0.0]), np.array([1.0, -0.5])
    n = 10_000
    X = np.r_[rng.multivariate_normal(mu0, sigma, n // 2), rng.multivariate_normal(mu1, sigma, n // 2)]
    y = np.r_[np.zeros(n // 2, int), np.ones(n // 2, int)]
    model = fit_lda(X, y)
    expected = np.linalg.solve(sigma, mu1 - mu0)
    assert np.linalg.norm(model.weights - expected) <= 0.05 * np.linalg.norm(expected)
    np.testing.assert_allclose(model.weights, expected, rtol=0.05)


def test_tie_goes_to_label_zero():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]])
    model = fit_lda(X, [0, 0, 1, 1])
    midpoint = (model.class_means[0] + model.class_means[1]) / 2
    assert model.decision_function(midpoint) == 0.0
    assert predict_lda(model, midpoint) == 0


def test_own_mean_is_classified_as_its_class():
    rng = np.random.default_rng(2)
    X = np.r_[rng.standard_normal((20, 3)), rng.standard_normal((20, 3)) + 3]
    model = fit_lda(X, [0] * 20 + [1] * 20)
    assert predict_lda(model, model.class_means[1]) == 1
    assert predict_lda(model, model.class_means[0]) == 0


def test_batch_prediction_matches_loop():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 4))
    y = np.r_[np.zeros(15, int), np.ones(15, int)]
    model = fit_lda(X + y[:, None], y)
    queries = rng.standard_normal((50, 4))
    batch = predict_lda(model, queries)
    assert batch.tolist() == [predict_lda(model, q) for q in queries]


def test_priors_shift_bias():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])[:, None]
    model = fit_lda(x, [0, 1, 1, 1, 0])
    assert model.priors == (0.4, 0.6)
    assert sum(model.priors) == 1.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_predictions_invariant_under_linear_map_without_shrinkage(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 3))
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    X[y == 1] += 1.0
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    Q = rng.standard_normal((25, 3))
    plain = fit_lda(X, y, shrinkage=0.0)
    mapped = fit_lda(X @ A.T, y, shrinkage=0.0)
    np.testing.assert_allclose(
        mapped.decision_function(Q @ A.T), plain.decision_function(Q), atol=1e-9
    )


def test_full_shrinkage_is_nearest_mean():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 3)) * [1.0, 5.0, 0.2]
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    X[y == 1] += [1.0, 2.0, -0.5]
    model = fit_lda(X, y, shrinkage=1.0)
    Q = rng.standard_normal((200, 3)) * 3
    d0 = np.linalg.norm(Q - model.class_means[0], axis=1)
    d1 = np.linalg.norm(Q - model.class_means[1], axis=1)
    assert predict_lda(model, Q).tolist() == (d1 < d0).astype(int).tolist()


def test_singular_covariance_uses_floor():
    # a constant feature gives a singular pooled covariance at gamma 0
    X = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0]])
    model = fit_lda(X, [0, 0, 1, 1], shrinkage=0.0)
    assert model.shrinkage == pytest.approx(1e-6)
    assert np.all(np.isfinite(model.weights))


@pytest.mark.parametrize(
    "X, y, match",
    [
        (np.ones((4, 2)), [0, 0, 0, 0], "both classes"),
        (np.ones((4, 2)), [0, 1, 2, 1], "0 or 1"),
        (np.ones((4, 2)), [0, 1], "labels"),
    ],
)
def test_fit_errors(X, y, match):
    with pytest.raises(ValueError, match=match):
        fit_lda(X, y)


def test_dimension_mismatch():
    model = fit_lda(np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]]), [0, 0, 1, 1])
    with pytest.raises(ValueError, match="dimension"):
        predict_lda(model, np.ones(3))


def test_estimator_api():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((30, 2))
    y = np.array(["a"] * 15 + ["b"] * 15)
    X[15:] += 2
    clf = ShrinkageLDA()
    assert clf.get_params() == {"shrinkage": "auto"}
    clf.fit(X, y)
    assert set(clf.predict(X)) <= {"a", "b"}
    assert clf.score(X, y) > 0.8
    assert 0.0 <= clf.shrinkage_ <= 1.0
    twin = clone(clf).fit(X, y)
    np.testing.assert_array_equal(twin.coef_, clf.coef_)
    assert twin.intercept_ == clf.intercept_
