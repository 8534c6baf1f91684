"""Dense linear models: PCA, softmax regression, and LDA.

Training is plain full-batch gradient descent or closed form, double
precision throughout, with fixed iteration counts, so two runs from the
same data produce bit-identical models.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PCAModel", "pca_fit", "pca_transform", "LogisticClassifier", "LDAClassifier"]


@dataclass(frozen=True)
class PCAModel:
    """Orthonormal linear projection: rows of `components` are the basis."""

    mean: np.ndarray
    components: np.ndarray


def pca_fit(X: np.ndarray, n_components: int) -> PCAModel:
    """Principal components by SVD of the centered data matrix.

    Component signs follow the convention that each component's largest
    absolute coefficient is positive, removing the SVD sign ambiguity.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    k = min(n_components, vt.shape[0])
    comps = vt[:k].copy()
    flips = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    flips[flips == 0] = 1.0
    comps *= flips[:, None]
    return PCAModel(mean, comps)


def pca_transform(model: PCAModel, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=float) - model.mean) @ model.components.T


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class LogisticClassifier:
    """Multinomial logistic regression trained by full-batch gradient descent."""

    def __init__(self, n_classes: int):
        self.n_classes = n_classes
        self.W: np.ndarray | None = None
        self.b: np.ndarray | None = None

    def fit(self, X, y, iterations: int = 400, lr: float = 0.5, l2: float = 1e-4) -> "LogisticClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        n, d = X.shape
        c = self.n_classes
        onehot = np.zeros((n, c))
        onehot[np.arange(n), y] = 1.0
        W = np.zeros((d, c))
        b = np.zeros(c)
        for _ in range(iterations):
            p = _softmax(X @ W + b)
            g = (p - onehot) / n
            W -= lr * (X.T @ g + l2 * W)
            b -= lr * g.sum(axis=0)
        self.W, self.b = W, b
        return self

    def decision_scores(self, X) -> np.ndarray:
        assert self.W is not None and self.b is not None, "fit first"
        return np.asarray(X, dtype=float) @ self.W + self.b

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_scores(np.atleast_2d(X)))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_scores(np.atleast_2d(X)), axis=1)


class LDAClassifier:
    """Linear discriminant analysis with a pooled, ridge-stabilized covariance."""

    def __init__(self, n_classes: int, ridge: float = 1e-6):
        self.n_classes = n_classes
        self.ridge = ridge
        self.means: np.ndarray | None = None
        self.precision: np.ndarray | None = None
        self.log_priors: np.ndarray | None = None

    def fit(self, X, y) -> "LDAClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        n, d = X.shape
        c = self.n_classes
        means = np.zeros((c, d))
        priors = np.full(c, 1e-12)
        pooled = np.zeros((d, d))
        for k in range(c):
            rows = X[y == k]
            if len(rows) == 0:
                continue
            means[k] = rows.mean(axis=0)
            priors[k] = len(rows) / n
            dk = rows - means[k]
            pooled += dk.T @ dk
        pooled /= max(n - c, 1)
        pooled += self.ridge * np.eye(d) * max(np.trace(pooled) / d, 1.0)
        self.means = means
        self.precision = np.linalg.inv(pooled)
        self.log_priors = np.log(priors)
        return self

    def decision_scores(self, X) -> np.ndarray:
        assert self.means is not None and self.precision is not None, "fit first"
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lin = X @ self.precision @ self.means.T
        quad = 0.5 * np.einsum("kd,dj,kj->k", self.means, self.precision, self.means)
        return lin - quad[None, :] + self.log_priors[None, :]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)
