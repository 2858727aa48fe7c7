"""Common spatial patterns with optional Tikhonov regularization.

For class covariances ``C_i`` and ``C_j`` a filter ``w`` is scored by

    J(w) = w' C_i w / (w' C_j w + alpha * w' w)

and the best filters are the leading generalized eigenvectors of the pencil
``(C_i, C_j + alpha I)``. ``alpha = 0`` is classical CSP.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Epoch
from .errors import DegenerateEpoch, EmptyClass, InvalidParams, NotPositiveDefinite, RankDeficient, DimensionMismatch
from .numerics import gen_sym_eig

LOG_FLOOR = np.log(1e-12)
DEFAULT_ALPHAS = (0.0,) + tuple(10.0 ** -e for e in range(1, 11))
DEFAULT_PAIR_COUNTS = tuple(range(2, 11))


@dataclass(frozen=True, eq=False)
class ClassCovariance:
    matrix: np.ndarray
    n_epochs: int


@dataclass(frozen=True, eq=False)
class SpatialFilterBank:
    filters: np.ndarray           # channels x 2*n_pairs, unit-norm columns
    objective_values: np.ndarray  # J(w) per filter
    n_pairs: int
    alpha: float

    def subset(self, n_pairs: int) -> "SpatialFilterBank":
        """The leading ``n_pairs`` of each half; same as refitting with fewer pairs."""
        if not 1 <= n_pairs <= self.n_pairs:
            raise InvalidParams(f"n_pairs must be in [1, {self.n_pairs}], got {n_pairs}")
        cols = list(range(n_pairs)) + list(range(self.n_pairs, self.n_pairs + n_pairs))
        return SpatialFilterBank(self.filters[:, cols], self.objective_values[cols], n_pairs, self.alpha)


def _as_array(epochs) -> np.ndarray:
    if isinstance(epochs, np.ndarray):
        return epochs
    return np.stack([ep.data if isinstance(ep, Epoch) else np.asarray(ep) for ep in epochs])


def epoch_scatters(epochs) -> np.ndarray:
    """Trace-normalized scatter ``X X' / tr(X X')`` of every epoch, shape (n, c, c)."""
    X = _as_array(epochs)
    S = np.einsum("nct,ndt->ncd", X, X)
    tr = np.trace(S, axis1=1, axis2=2)
    if np.any(tr <= 0):
        bad = int(np.flatnonzero(tr <= 0)[0])
        raise DegenerateEpoch(f"epoch {bad} has zero power")
    return S / tr[:, None, None]


def class_covariance(epochs: Sequence[Epoch] | np.ndarray) -> ClassCovariance:
    """Average trace-normalized spatial covariance of one class."""
    if len(epochs) == 0:
        raise EmptyClass("no epochs for this class")
    S = epoch_scatters(epochs)
    C = S.mean(axis=0)
    return ClassCovariance(0.5 * (C + C.T), len(S))


def objective(w, C_i, C_j, alpha: float = 0.0) -> float:
    """Regularized variance ratio J(w)."""
    w = np.asarray(w, dtype=float)
    return float(w @ C_i @ w / (w @ C_j @ w + alpha * (w @ w)))


def _top_filters(C_i, C_j, alpha, n):
    B = C_j + alpha * np.eye(len(C_j))
    try:
        res = gen_sym_eig(C_i, B)
    except NotPositiveDefinite as exc:
        raise RankDeficient(f"C_j + {alpha} I is not positive definite") from exc
    W = res.vectors[:, :n]
    return W / np.linalg.norm(W, axis=0), res.values[:n]


def fit_csp(cov1: ClassCovariance, cov0: ClassCovariance, alpha: float = 0.0, n_pairs: int = 3) -> SpatialFilterBank:
    """Filters favouring class 1 power first, then filters favouring class 0.

    Each half solves its own regularized pencil, so for ``alpha > 0`` the
    second half is not simply the bottom of the first spectrum.
    """
    C1 = np.asarray(getattr(cov1, "matrix", cov1), dtype=float)
    C0 = np.asarray(getattr(cov0, "matrix", cov0), dtype=float)
    if C1.shape != C0.shape:
        raise DimensionMismatch(f"covariance shapes differ: {C1.shape} vs {C0.shape}")
    if alpha < 0:
        raise InvalidParams("alpha must be non-negative")
    n_ch = C1.shape[0]
    if not 1 <= n_pairs <= n_ch // 2:
        raise InvalidParams(f"n_pairs must be in [1, {n_ch // 2}], got {n_pairs}")
    W1, J1 = _top_filters(C1, C0, alpha, n_pairs)
    W0, J0 = _top_filters(C0, C1, alpha, n_pairs)
    return SpatialFilterBank(np.hstack([W1, W0]), np.concatenate([J1, J0]), n_pairs, float(alpha))


def log_variance_features(epoch, bank: SpatialFilterBank) -> np.ndarray:
    """``ln var(w_k' X)`` for every filter, with the biased (1/L) variance."""
    X = epoch.data if isinstance(epoch, Epoch) else np.asarray(epoch, dtype=float)
    if X.ndim == 2:
        return log_variance_features(X[None], bank)[0]
    if X.shape[1] != bank.filters.shape[0]:
        raise DimensionMismatch(f"epoch has {X.shape[1]} channels, filters expect {bank.filters.shape[0]}")
    Y = np.einsum("ck,nct->nkt", bank.filters, X)
    var = Y.var(axis=2)
    with np.errstate(divide="ignore"):
        out = np.log(var)
    return np.maximum(out, LOG_FLOOR)
