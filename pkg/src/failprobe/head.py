"""Single-layer sigmoid classification head trained by deterministic full-batch
gradient descent, plus an sklearn-compatible estimator wrapper."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import NumericalError
from .validation import check_binary_labels, check_feature_matrix, check_vector

LOSS_EPS = 1e-12


@dataclass(frozen=True)
class Head:
    weights: np.ndarray  # float64, length input_dim
    bias: float

    @property
    def input_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-5
    init: str = "uniform"  # "zeros" or "uniform"
    init_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.init not in ("zeros", "uniform"):
            raise ValueError(f"init must be 'zeros' or 'uniform', got {self.init!r}")


def sigmoid(z):
    """Logistic function with a stable branch per sign, so large |z| never
    overflows."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def init_head(input_dim: int, config: TrainConfig) -> Head:
    """Zero or seeded-uniform weights in [-scale, +scale]; bias starts at 0."""
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    if config.init == "zeros":
        weights = np.zeros(input_dim, dtype=np.float64)
    else:
        rng = np.random.default_rng(config.seed)
        weights = rng.uniform(-config.init_scale, config.init_scale, input_dim)
    return Head(weights=weights, bias=0.0)


def forward(head: Head, x) -> float:
    """Death probability sigma(w.x + b) for one feature vector."""
    x = check_vector(x, head.input_dim)
    return float(sigmoid(head.weights @ x + head.bias))


def forward_batch(head: Head, X) -> np.ndarray:
    X = check_feature_matrix(X)
    if X.shape[1] != head.input_dim:
        raise ValueError(f"X has {X.shape[1]} features, head expects {head.input_dim}")
    return sigmoid(X @ head.weights + head.bias)


def bce_loss(p: float, y: float) -> float:
    """Binary cross-entropy with the log arguments clamped at 1e-12."""
    p = float(p)
    return -(y * np.log(max(p, LOSS_EPS)) + (1.0 - y) * np.log(max(1.0 - p, LOSS_EPS)))


def mean_bce(P: np.ndarray, Y: np.ndarray) -> float:
    P = np.asarray(P, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    return float(
        -np.mean(Y * np.log(np.maximum(P, LOSS_EPS)) + (1.0 - Y) * np.log(np.maximum(1.0 - P, LOSS_EPS)))
    )


def gradient(head: Head, X, y) -> tuple[np.ndarray, float]:
    """Mean-BCE gradient through the sigmoid: ((p - y) x, p - y) averaged over
    the batch."""
    X = check_feature_matrix(X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    y = check_binary_labels(y, X.shape[0])
    p = forward_batch(head, X)
    residual = p - y
    grad_w = X.T @ residual / X.shape[0]
    grad_b = float(np.mean(residual))
    return grad_w, grad_b


def train(head: Head, X, y, config: TrainConfig) -> tuple[Head, list[float]]:
    """Full-batch gradient descent for `epochs` steps at a fixed learning rate.

    Deterministic given (head, batch, config). Returns the final head and the
    loss trace, one entry per epoch evaluated before that epoch's update.
    Aborts on a non-finite loss.
    """
    X = check_feature_matrix(X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    y = check_binary_labels(y, X.shape[0])
    if X.shape[1] != head.input_dim:
        raise ValueError(f"X has {X.shape[1]} features, head expects {head.input_dim}")

    w = head.weights.astype(np.float64).copy()
    b = float(head.bias)
    m = X.shape[0]
    trace: list[float] = []
    for epoch in range(config.epochs):
        p = sigmoid(X @ w + b)
        loss = mean_bce(p, y)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss {loss} at epoch {epoch}")
        trace.append(loss)
        residual = p - y
        w -= config.learning_rate * (X.T @ residual / m)
        b -= config.learning_rate * float(np.mean(residual))
    return Head(weights=w, bias=b), trace


def predict(head: Head, x, threshold: float = 0.5) -> tuple[int, float]:
    """(label, death probability); the decision boundary itself maps to death."""
    p = forward(head, x)
    return (1 if p >= threshold else 0), p


class SigmoidHeadClassifier(ClassifierMixin, BaseEstimator):
    """Sklearn-style face of the sigmoid head: fit/predict/predict_proba with
    the same deterministic full-batch descent underneath.

    Class 1 is death; `threshold` sets the decision boundary on the death
    probability, with ties going to class 1.
    """

    def __init__(
        self,
        epochs: int = 100,
        learning_rate: float = 1e-5,
        init: str = "uniform",
        init_scale: float = 0.01,
        seed: int = 0,
        threshold: float = 0.5,
    ):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.init = init
        self.init_scale = init_scale
        self.seed = seed
        self.threshold = threshold

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            init=self.init,
            init_scale=self.init_scale,
            seed=self.seed,
        )

    def fit(self, X, y):
        X = check_feature_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        config = self._config()
        head, trace = train(init_head(X.shape[1], config), X, y, config)
        self.weights_ = head.weights
        self.bias_ = head.bias
        self.loss_trace_ = trace
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("fit must be called before predict")

    def predict_proba(self, X):
        self._check_fitted()
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        p = sigmoid(X @ self.weights_ + self.bias_)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        proba = self.predict_proba(X)
        return (proba[:, 1] >= self.threshold).astype(int)

    @property
    def head_(self) -> Head:
        self._check_fitted()
        return Head(weights=self.weights_, bias=self.bias_)
