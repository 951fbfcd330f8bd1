"""Probabilistic linear classifiers for the per-feature-set ensemble members.

Default mode is logistic regression (L2-regularized cross-entropy, L-BFGS,
gradient-norm tolerance 1e-6). A literal least-squares-on-{0,1} mode with
output clamped to [0,1] is kept behind the ``mode`` switch for fidelity
experiments; probabilities from it are not calibrated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

MAX_ITER = 1000
GRAD_TOL = 1e-6
_PROB_EPS = 1e-12

LOGISTIC = "logistic"
LEAST_SQUARES = "least_squares"


class SingleClassError(ValueError):
    """Training labels contain one class only; check the stratification upstream."""


@dataclass
class ProbabilisticLinearModel:
    weights: np.ndarray
    bias: float
    reg: float
    feature_set: str
    mode: str = LOGISTIC

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def train_probabilistic_linear(
    X: np.ndarray,
    y: np.ndarray,
    reg: float,
    feature_set: str = "",
    mode: str = LOGISTIC,
) -> ProbabilisticLinearModel:
    """Fit one probabilistic linear model on a feature matrix.

    Requires both classes present. ``reg`` is the L2 penalty on the weights
    (bias unpenalized).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-dimensional")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"feature rows ({X.shape[0]}) != labels ({y.shape[0]})")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    if classes.size < 2:
        raise SingleClassError(
            "training data contains a single class; check the stratification of the split"
        )
    if mode == LEAST_SQUARES:
        return _train_least_squares(X, y, reg, feature_set)
    if mode != LOGISTIC:
        raise ValueError(f"unknown classifier mode {mode!r}")

    n, d = X.shape

    def objective(params):
        w, b = params[:d], params[d]
        z = X @ w + b
        # mean logistic loss; log(1+e^-m) via logaddexp for stability
        margins = np.where(y == 1.0, z, -z)
        loss = np.logaddexp(0.0, -margins).mean() + 0.5 * reg * (w @ w)
        p = _sigmoid(z)
        resid = p - y
        grad_w = X.T @ resid / n + reg * w
        grad_b = resid.mean()
        return loss, np.concatenate([grad_w, [grad_b]])

    start = np.zeros(d + 1)
    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": MAX_ITER, "gtol": GRAD_TOL, "ftol": 1e-14},
    )
    params = result.x
    return ProbabilisticLinearModel(
        weights=params[:d], bias=float(params[d]), reg=reg, feature_set=feature_set
    )


def _train_least_squares(X, y, reg, feature_set) -> ProbabilisticLinearModel:
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    gram = Xb.T @ Xb
    gram[:d, :d] += reg * np.eye(d)
    params = np.linalg.solve(gram, Xb.T @ y)
    return ProbabilisticLinearModel(
        weights=params[:d],
        bias=float(params[d]),
        reg=reg,
        feature_set=feature_set,
        mode=LEAST_SQUARES,
    )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def predict_proba(model: ProbabilisticLinearModel, x: np.ndarray) -> np.ndarray | float:
    """Positive-class probability for one feature vector or a matrix of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"feature dim {x.shape[-1]} != model dim {model.dim}")
    z = x @ model.weights + model.bias
    if model.mode == LEAST_SQUARES:
        p = np.clip(z, 0.0, 1.0)
    else:
        p = np.clip(_sigmoid(z), _PROB_EPS, 1.0 - _PROB_EPS)
    if np.ndim(p) == 0:
        return float(p)
    return p
