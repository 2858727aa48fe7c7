"""Dense symmetric eigensolvers and SVD built on Jacobi rotations.

The rotation kernels run row-cyclic sweeps in a fixed (p, q) order, so every
result is a deterministic function of the input bytes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import solve_triangular

from .errors import NoConvergence, NotPositiveDefinite, NotSymmetric

MAX_SWEEPS = 64
# above this many columns svd() defaults to LAPACK; see svd()
JACOBI_MAX_DIM = 1024


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray   # descending
    vectors: np.ndarray  # columns


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def truncate(self, k: int) -> "SvdResult":
        return SvdResult(self.u[:, :k], self.sigma[:k], self.v[:, :k])


@numba.njit(cache=True)
def _jacobi_sweeps(A, V, target, max_sweeps):
    n = A.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        if np.sqrt(off) <= target:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[p, k]
                    vkq = V[q, k]
                    V[p, k] = c * vkp - s * vkq
                    V[q, k] = s * vkp + c * vkq
    return -1


@numba.njit(cache=True)
def _one_sided_sweeps(GT, VT, tol, max_sweeps):
    """Orthogonalize the rows of GT, accumulating the rotations in VT."""
    n, m = GT.shape
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += GT[p, i] * GT[p, i]
                    beta += GT[q, i] * GT[q, i]
                    gamma += GT[p, i] * GT[q, i]
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = 1.0 / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                    if zeta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for i in range(m):
                    gp = GT[p, i]
                    gq = GT[q, i]
                    GT[p, i] = c * gp - s * gq
                    GT[q, i] = s * gp + c * gq
                for i in range(n):
                    vp = VT[p, i]
                    vq = VT[q, i]
                    VT[p, i] = c * vp - s * vq
                    VT[q, i] = s * vp + c * vq
        if not rotated:
            return sweep
    return -1


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(A, tol: float = 1e-12, max_sweeps: int = MAX_SWEEPS) -> EigenResult:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * ||A||_F``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NotSymmetric("matrix has non-finite entries")
    norm = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > 1e-10 * norm:
        raise NotSymmetric("matrix is not symmetric within 1e-10 relative")
    A = np.ascontiguousarray(0.5 * (A + A.T))
    VT = np.eye(A.shape[0])
    if _jacobi_sweeps(A, VT, tol * norm, max_sweeps) < 0:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    return EigenResult(values[order], _fix_signs(VT.T[:, order]))


def _complete_basis(U: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace columns of U where ``good`` is False by an orthonormal completion."""
    m = U.shape[0]
    basis = [U[:, j] for j in np.flatnonzero(good)]
    out = U.copy()
    candidates = iter(np.eye(m))
    for j in np.flatnonzero(~good):
        while True:
            e = next(candidates)
            for _ in range(2):  # twice is enough
                for b in basis:
                    e = e - (b @ e) * b
            nrm = np.linalg.norm(e)
            if nrm > 1e-6:
                break
        out[:, j] = e / nrm
        basis.append(out[:, j])
    return out


def svd(X, method: str = "auto", tol: float = 1e-15, max_sweeps: int = MAX_SWEEPS) -> SvdResult:
    """Thin SVD ``X = U diag(sigma) V^T``.

    ``method="jacobi"`` runs one-sided Jacobi on the triangular factor of a
    Householder QR (tall inputs) or on the transpose (wide inputs).
    ``method="lapack"`` calls ``numpy.linalg.svd``; ``"auto"`` picks Jacobi
    when the smaller dimension is at most ``JACOBI_MAX_DIM``. Both paths
    return descending singular values and the same sign convention.
    """
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    if method == "auto":
        method = "jacobi" if min(X.shape) <= JACOBI_MAX_DIM else "lapack"
    if method not in ("jacobi", "lapack"):
        raise ValueError(f"unknown svd method {method!r}")
    m, n = X.shape
    if m < n:
        res = svd(X.T, method, tol, max_sweeps)
        return SvdResult(res.v, res.sigma, res.u)
    if n == 0:
        return SvdResult(np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0)))

    if method == "lapack":
        try:
            U, sigma, Vt = np.linalg.svd(X, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(str(exc)) from exc
        V = Vt.T
    else:
        Q, R = np.linalg.qr(X, mode="reduced")
        GT = np.ascontiguousarray(R.T)
        VT = np.eye(n)
        if _one_sided_sweeps(GT, VT, max(tol, np.finfo(float).eps * n), max_sweeps) < 0:
            raise NoConvergence(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")
        sigma = np.linalg.norm(GT, axis=1)
        order = np.argsort(-sigma, kind="stable")
        sigma, G, V = sigma[order], GT[order].T, VT[order].T
        cutoff = np.finfo(float).eps * m * (sigma[0] if sigma[0] > 0 else 1.0)
        good = sigma > cutoff
        Ur = np.zeros_like(G)
        Ur[:, good] = G[:, good] / sigma[good]
        if not np.all(good):
            Ur = _complete_basis(Ur, good)
            sigma = np.where(good, sigma, 0.0)
        U = Q @ Ur
    # flipping u_i and v_i together leaves the factorization unchanged
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(n)])
    signs[signs == 0] = 1.0
    return SvdResult(U * signs, sigma, V * signs)


def gen_sym_eig(A, B) -> EigenResult:
    """Solve ``A v = lambda B v`` for symmetric A and positive-definite B.

    B is whitened by its Cholesky factor; eigenvectors come back
    B-orthonormal.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    try:
        L = np.linalg.cholesky(0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("B is not positive definite") from exc
    if not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0):
        raise NotPositiveDefinite("B is not positive definite")
    M = solve_triangular(L, 0.5 * (A + A.T), lower=True)
    M = solve_triangular(L, M.T, lower=True)
    res = sym_eig(0.5 * (M + M.T))
    vectors = solve_triangular(L.T, res.vectors, lower=False)
    return EigenResult(res.values, _fix_signs(vectors))
