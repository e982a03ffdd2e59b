"""Dense linear-algebra kernels.

Matrices are plain 2-D float64 numpy arrays in row-major (C) order.  The
matrix-vector products here back the public API and the analyzers; the
solver's hot loop has its own compiled kernel (see :mod:`rpdhg_lab.kernel`).

Spectral extremes are computed once per solve to set step sizes: the largest
singular value by power iteration on ``A A^T``, the smallest nonzero singular
value from a full Jacobi eigendecomposition of the same Gram matrix.  At desk
scale (m up to ~2000) the O(m^3) Jacobi sweep is cheap and sidesteps a
bidiagonal SVD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .errors import ConvergenceError, DegenerateMatrixError, SingularMatrixError
from .rng import make_rng

__all__ = [
    "SpectralExtremes",
    "matvec",
    "matvec_t",
    "spectral_extremes",
    "spectral_norm",
    "lu_factor",
    "lu_solve",
    "min_norm_presolve",
]

# Singular values below RANK_RTOL * sigma_max count as zero.  Generated
# instances are full-rank almost surely; this only guards pathological input.
RANK_RTOL = 1e-10

_POWER_SEED = 0x5EEDFACE  # fixed internal seed keeps spectral routines pure


@dataclass(frozen=True)
class SpectralExtremes:
    """Largest and smallest nonzero singular values of a matrix."""

    sigma_max: float
    sigma_min_nonzero: float
    iterations_used: int


def _as_matrix(A) -> np.ndarray:
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={A.ndim}")
    return A


def matvec(A, x) -> np.ndarray:
    """Product ``A x`` for a row-major dense matrix.

    Raises ``ValueError`` on dimension mismatch.
    """
    A = _as_matrix(A)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.shape[1],):
        raise ValueError(f"matvec: x has shape {x.shape}, expected ({A.shape[1]},)")
    return A @ x


def matvec_t(A, y) -> np.ndarray:
    """Product ``A^T y``.

    Raises ``ValueError`` on dimension mismatch.
    """
    A = _as_matrix(A)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.shape[0],):
        raise ValueError(f"matvec_t: y has shape {y.shape}, expected ({A.shape[0]},)")
    return A.T @ y


def spectral_norm(A, rel_tol: float = 1e-6, max_iters: int = 20000) -> tuple[float, int]:
    """Largest singular value of ``A`` by power iteration on ``A A^T``.

    Starts from a fixed-seed random vector and stops when successive Rayleigh
    quotients agree to a relative ``rel_tol**2`` (the quotient converges at
    twice the rate of the iterate).  Returns ``(sigma_max, iterations)``.
    """
    A = _as_matrix(A)
    m = A.shape[0]
    q = make_rng(_POWER_SEED).standard_normal(m)
    nq = float(np.linalg.norm(q))
    q /= nq
    lam_prev = -1.0
    its = 0
    for its in range(1, max_iters + 1):
        v = A.T @ q
        lam = float(v @ v)  # Rayleigh quotient of A A^T at q
        if lam == 0.0:
            return 0.0, its
        if lam_prev >= 0.0 and abs(lam - lam_prev) < rel_tol * rel_tol * lam:
            break
        w = A @ v
        q = w / np.linalg.norm(w)
        lam_prev = lam
    return float(np.sqrt(lam)), its


def spectral_extremes(A, rel_tol: float = 1e-6) -> SpectralExtremes:
    """Largest and smallest nonzero singular values of a wide matrix.

    Parameters
    ----------
    A : ndarray, shape (m, n) with m <= n
        Dense matrix.
    rel_tol : float in (0, 1e-2]
        Relative accuracy target for both extremes.

    Raises
    ------
    DegenerateMatrixError
        If every singular value falls below ``RANK_RTOL * sigma_max``
        (zero matrix).
    """
    A = _as_matrix(A)
    m, n = A.shape
    if m > n:
        raise ValueError(f"spectral_extremes: expected rows <= cols, got {m}x{n}")
    if not (0.0 < rel_tol <= 1e-2):
        raise ValueError(f"spectral_extremes: rel_tol must lie in (0, 1e-2], got {rel_tol}")

    sigma_max, its = spectral_norm(A, rel_tol)
    if sigma_max == 0.0:
        raise DegenerateMatrixError("spectral_extremes: zero matrix")

    gram = A @ A.T
    eigs = kernel.jacobi_eigvals(gram)
    sigmas = np.sqrt(np.clip(eigs, 0.0, None))
    threshold = RANK_RTOL * sigma_max
    nonzero = sigmas[sigmas > threshold]
    if nonzero.size == 0:
        raise DegenerateMatrixError("spectral_extremes: all singular values below rank threshold")
    sigma_min = float(nonzero.min())
    # Power iteration can undershoot by O(rel_tol); keep the ordering invariant.
    return SpectralExtremes(max(sigma_max, sigma_min), sigma_min, its)


def lu_factor(B) -> tuple[np.ndarray, np.ndarray]:
    """LU factorization with partial (row) pivoting.

    Returns ``(lu, perm)`` where ``lu`` packs the unit-lower and upper factors
    and ``perm`` is the row permutation such that ``B[perm] = L U``.

    Raises ``SingularMatrixError`` when a pivot falls below
    ``1e-12 * ||B||_F``.
    """
    B = _as_matrix(B)
    nrows, ncols = B.shape
    if nrows != ncols:
        raise ValueError(f"lu_factor: matrix must be square, got {nrows}x{ncols}")
    lu = B.copy()
    perm = np.arange(nrows)
    pivot_tol = 1e-12 * float(np.linalg.norm(B))
    for k in range(nrows):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= pivot_tol:
            raise SingularMatrixError(f"lu_factor: pivot {lu[p, k]:.3e} below threshold at column {k}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1 :, k] /= lu[k, k]
        if k + 1 < nrows:
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm


def lu_solve(B, rhs) -> np.ndarray:
    """Solve ``B X = rhs`` by pivoted LU factorization.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides; the
    result has the same shape.
    """
    lu, perm = lu_factor(B)
    rhs = np.asarray(rhs, dtype=np.float64)
    vector_rhs = rhs.ndim == 1
    X = rhs.reshape(-1, 1).copy() if vector_rhs else rhs.copy()
    if X.shape[0] != lu.shape[0]:
        raise ValueError(f"lu_solve: rhs has {X.shape[0]} rows, expected {lu.shape[0]}")
    X = X[perm]
    n = lu.shape[0]
    for k in range(1, n):  # forward substitution, unit lower factor
        X[k] -= lu[k, :k] @ X[:k]
    for k in range(n - 1, -1, -1):  # back substitution
        if k + 1 < n:
            X[k] -= lu[k, k + 1 :] @ X[k + 1 :]
        X[k] /= lu[k, k]
    return X[:, 0] if vector_rhs else X


def min_norm_presolve(A, s, rel_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-norm objective replacement.

    Solves ``A A^T y = -A s`` by conjugate gradients and returns
    ``(y_hat, c_bar)`` with ``c_bar = s + A^T y_hat``, the vector of smallest
    Euclidean norm among objectives equivalent to ``s``.  On return
    ``||A c_bar|| <= 10 * rel_tol * ||A|| * ||c_bar||``, i.e. ``c_bar`` lies
    in the null space of ``A`` up to the requested accuracy.

    Raises ``ConvergenceError`` if conjugate gradients cannot reach the
    target residual within ``10 m`` iterations (e.g. rank-deficient ``A``).
    """
    A = _as_matrix(A)
    m, n = A.shape
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (n,):
        raise ValueError(f"min_norm_presolve: s has shape {s.shape}, expected ({n},)")

    rhs = -(A @ s)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(m), s.copy()

    max_iters = 10 * m
    y = np.zeros(m)
    r = rhs.copy()
    p = r.copy()
    rs = float(r @ r)
    target = rel_tol * rhs_norm
    norm_a = None
    used = 0
    while used < max_iters:
        while np.sqrt(rs) > target and used < max_iters:
            Gp = A @ (A.T @ p)
            denom = float(p @ Gp)
            if denom <= 0.0:
                raise ConvergenceError("min_norm_presolve: conjugate gradients broke down (rank-deficient A?)")
            alpha = rs / denom
            y += alpha * p
            r -= alpha * Gp
            rs_new = float(r @ r)
            p = r + (rs_new / rs) * p
            rs = rs_new
            used += 1
        # Re-evaluate with the true residual; the CG recursion can drift.
        r = rhs - A @ (A.T @ y)
        rs = float(r @ r)
        p = r.copy()
        if np.sqrt(rs) > target:
            continue
        c_bar = s + A.T @ y
        if norm_a is None:
            norm_a = spectral_norm(A, 1e-4)[0]
        bound = 10.0 * rel_tol * norm_a * float(np.linalg.norm(c_bar))
        if np.sqrt(rs) <= max(bound, 0.0) or np.sqrt(rs) <= np.finfo(float).eps * rhs_norm:
            return y, c_bar
        target = min(target, max(bound, np.finfo(float).eps * rhs_norm)) * 0.5
    raise ConvergenceError(f"min_norm_presolve: no convergence within {max_iters} iterations")
