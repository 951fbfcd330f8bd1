import numpy as np
import pytest

from urgencykit.linear import (
    LEAST_SQUARES,
    ProbabilisticLinearModel,
    SingleClassError,
    predict_proba,
    train_probabilistic_linear,
)


def separable_toy(n_per_class=50, seed=0):
    rng = np.random.default_rng(seed)
    pos = rng.normal((1.0, 1.0), 0.15, (n_per_class, 2))
    neg = rng.normal((0.0, 0.0), 0.15, (n_per_class, 2))
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n_per_class), np.zeros(n_per_class)])
    return X, y


def test_separable_set_fits():
    X, y = separable_toy()
    model = train_probabilistic_linear(X, y, reg=0.01)
    preds = (np.asarray(predict_proba(model, X)) > 0.5).astype(float)
    assert (preds == y).mean() >= 0.99


def test_symmetric_pair_midpoint_is_half():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]] * 5)
    y = np.array([1.0, 0.0] * 5)
    model = train_probabilistic_linear(X, y, reg=0.1)
    assert abs(predict_proba(model, np.zeros(2)) - 0.5) < 1e-6


def test_single_class_rejected():
    X = np.ones((4, 2))
    with pytest.raises(SingleClassError, match="stratification"):
        train_probabilistic_linear(X, np.ones(4), reg=1.0)


def test_shape_validation():
    with pytest.raises(ValueError, match="rows"):
        train_probabilistic_linear(np.ones((3, 2)), np.array([1.0, 0.0]), reg=1.0)
    with pytest.raises(ValueError, match="labels must be 0 or 1"):
        train_probabilistic_linear(np.ones((2, 2)), np.array([0.5, 1.0]), reg=1.0)


def test_zero_model_outputs_half():
    model = ProbabilisticLinearModel(weights=np.zeros(3), bias=0.0, reg=1.0, feature_set="t")
    assert predict_proba(model, np.array([5.0, -2.0, 0.3])) == 0.5


def test_sigmoid_monotone_in_positive_weight():
    model = ProbabilisticLinearModel(
        weights=np.array([2.0, -1.0]), bias=0.1, reg=1.0, feature_set="t"
    )
    lo = predict_proba(model, np.array([0.0, 0.5]))
    hi = predict_proba(model, np.array([1.0, 0.5]))
    assert hi > lo


def test_hand_computed_sigmoid():
    model = ProbabilisticLinearModel(weights=np.array([1.0]), bias=0.0, reg=1.0, feature_set="t")
    assert predict_proba(model, np.array([0.0])) == 0.5


def test_outputs_strictly_inside_unit_interval():
    model = ProbabilisticLinearModel(
        weights=np.array([100.0]), bias=0.0, reg=1.0, feature_set="t"
    )
    hi = predict_proba(model, np.array([10.0]))
    lo = predict_proba(model, np.array([-10.0]))
    assert 0.0 < lo < hi < 1.0


def test_dim_mismatch():
    model = ProbabilisticLinearModel(weights=np.zeros(3), bias=0.0, reg=1.0, feature_set="t")
    with pytest.raises(ValueError, match="dim"):
        predict_proba(model, np.zeros(4))


def test_least_squares_mode():
    X, y = separable_toy()
    model = train_probabilistic_linear(X, y, reg=0.1, mode=LEAST_SQUARES)
    probs = np.asarray(predict_proba(model, X))
    assert np.all((probs >= 0.0) & (probs <= 1.0))
    preds = (probs > 0.5).astype(float)
    assert (preds == y).mean() >= 0.95


def test_regularization_shrinks_weights():
    X, y = separable_toy()
    loose = train_probabilistic_linear(X, y, reg=0.001)
    tight = train_probabilistic_linear(X, y, reg=10.0)
    assert np.linalg.norm(tight.weights) < np.linalg.norm(loose.weights)


def test_deterministic_fit():
    X, y = separable_toy(seed=3)
    m1 = train_probabilistic_linear(X, y, reg=0.1)
    m2 = train_probabilistic_linear(X, y, reg=0.1)
    assert np.array_equal(m1.weights, m2.weights)
    assert m1.bias == m2.bias
