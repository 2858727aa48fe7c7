"""Two-class Fisher linear discriminant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .errors import DimensionMismatch, SingleClass

RIDGE = 1e-6


@dataclass(frozen=True, eq=False)
class LdaModel:
    direction: np.ndarray
    threshold: float
    class_means: tuple[np.ndarray, np.ndarray]  # (class 0, class 1)
    pooled_cov_ridge: float

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.direction.shape[0]:
            raise DimensionMismatch(f"expected {self.direction.shape[0]} features, got {X.shape[-1]}")
        return X

    def project(self, X):
        return self._check(X) @ self.direction

    def classify(self, X):
        return (self.project(X) > self.threshold).astype(int)


def fit_lda(features, labels) -> LdaModel:
    """Fit on an (n, d) feature array and 0/1 labels.

    The direction is ``(S + eps I)^-1 (mu1 - mu0)`` normalized, where S is the
    pooled within-class covariance and ``eps = 1e-6 tr(S) / d``. The
    threshold sits midway between the projected class means (equal priors).
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels).astype(int)
    if X.ndim != 2 or X.shape[1] < 1 or len(X) != len(y):
        raise DimensionMismatch(f"features {X.shape} do not match {len(y)} labels")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise SingleClass("LDA needs samples from both classes")
    mu0, mu1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
    resid = np.where((y == 1)[:, None], X - mu1, X - mu0)
    dof = max(len(X) - 2, 1)
    S = resid.T @ resid / dof
    d = X.shape[1]
    eps = RIDGE * np.trace(S) / d
    if eps <= 0:
        eps = RIDGE
    w = solve(S + eps * np.eye(d), mu1 - mu0, assume_a="pos")
    nrm = np.linalg.norm(w)
    if nrm == 0:
        w = np.zeros(d)
        w[0] = 1.0
    else:
        w = w / nrm
    threshold = 0.5 * float(w @ mu0 + w @ mu1)
    return LdaModel(w, threshold, (mu0, mu1), float(eps))


def project(model: LdaModel, x):
    return model.project(x)


def classify(model: LdaModel, x):
    return model.classify(x)
