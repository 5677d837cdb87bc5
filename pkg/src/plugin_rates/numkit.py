"""
Small dense symmetric linear algebra.

The systems solved here are the M x M local moment matrices of the local
polynomial estimator, with M the number of multi-indices of degree at most
l. M is tiny (1 to ~30), but there are many of them: one per query point.
Every routine therefore accepts a stack of matrices of shape ``(..., M, M)``
and loops only over the matrix dimension, never over the stack.

All arithmetic is float64.
"""
from __future__ import annotations

import numpy as np

from .errors import Singular

PIVOT_TOL = 1e-12
JACOBI_TOL = 1e-12
MAX_SWEEPS = 60


def as_symmetric(a, atol: float = 1e-12) -> np.ndarray:
    """Validate ``a`` as a symmetric matrix and return an exactly symmetric copy.

    The lower triangle is overwritten with the upper one, so entries[i][j] ==
    entries[j][i] holds bit for bit afterwards.
    """
    a = np.array(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if not np.allclose(a, np.swapaxes(a, -1, -2), rtol=0.0, atol=atol * scale):
        raise ValueError("matrix is not symmetric")
    upper = np.triu(a)
    return upper + np.swapaxes(np.triu(a, 1), -1, -2)


def cholesky(a: np.ndarray, tol: float = PIVOT_TOL):
    """Batched Cholesky factorization ``a = L L^T``.

    Returns
    -------
    L : ndarray, shape (..., M, M)
        Lower-triangular factors. Rows of failed factorizations are garbage.
    singular : ndarray of bool, shape (...)
        True where some pivot was ``<= tol``.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    low = np.zeros_like(a)
    singular = np.zeros(a.shape[:-2], dtype=bool)
    for j in range(m):
        row = low[..., j, :j]
        pivot = a[..., j, j] - np.einsum("...k,...k->...", row, row)
        bad = ~(pivot > tol)
        singular |= bad
        root = np.sqrt(np.where(bad, 1.0, pivot))
        low[..., j, j] = root
        if j + 1 < m:
            below = a[..., j + 1:, j] - np.einsum("...ik,...k->...i", low[..., j + 1:, :j], row)
            low[..., j + 1:, j] = below / root[..., None]
    return low, singular


def cholesky_solve(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L L^T x = b`` for stacked factors and right-hand sides."""
    m = low.shape[-1]
    y = np.array(b, dtype=float)
    for i in range(m):
        y[..., i] = (y[..., i] - np.einsum("...k,...k->...", low[..., i, :i], y[..., :i])) / low[..., i, i]
    x = y
    for i in range(m - 1, -1, -1):
        x[..., i] = (x[..., i] - np.einsum("...k,...k->...", low[..., i + 1:, i], x[..., i + 1:])) / low[..., i, i]
    return x


def solve_sym_batch(a, b, tol: float = PIVOT_TOL):
    """Solve stacked SPD systems; returns ``(x, singular)`` without raising.

    Solutions for singular entries are set to zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    low, singular = cholesky(a, tol)
    x = cholesky_solve(low, b)
    x[singular] = 0.0
    return x, singular


def solve_sym(a, b, tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve ``a x = b`` for one symmetric positive definite matrix.

    Parameters
    ----------
    a : array_like, shape (M, M)
        Symmetric matrix.
    b : array_like, shape (M,)
        Right-hand side.
    tol : float
        Pivot tolerance of the Cholesky factorization.

    Raises
    ------
    Singular
        If a pivot is ``<= tol``: ``a`` is not (numerically) positive
        definite and the least-squares minimizer behind it is not unique.
    """
    a = as_symmetric(a)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.shape != (a.shape[0],):
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    x, singular = solve_sym_batch(a, b, tol)
    if singular:
        raise Singular("pivot below tolerance in Cholesky factorization")
    return x


def jacobi_eigenvalues(a, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """All eigenvalues of stacked symmetric matrices by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm of every matrix is
    at most ``tol * max(1, ||A||_F)``. Returns eigenvalues sorted ascending,
    shape ``(..., M)``.
    """
    a = np.array(a, dtype=float)
    m = a.shape[-1]
    if m == 1:
        return a[..., 0, :].copy()
    limit = tol * np.maximum(1.0, np.sqrt(np.einsum("...ij,...ij->...", a, a)))
    for _ in range(max_sweeps):
        off = _offdiag_norm(a)
        if np.all(off <= limit):
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                _rotate(a, p, q)
    return np.sort(np.diagonal(a, axis1=-2, axis2=-1), axis=-1)


def _offdiag_norm(a):
    diag = np.diagonal(a, axis1=-2, axis2=-1)
    total = np.einsum("...ij,...ij->...", a, a) - np.einsum("...i,...i->...", diag, diag)
    return np.sqrt(np.maximum(total, 0.0))


def _rotate(a, p, q):
    app = a[..., p, p].copy()
    aqq = a[..., q, q].copy()
    apq = a[..., p, q].copy()
    active = apq != 0.0
    safe = np.where(active, apq, 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        theta = (aqq - app) / (2.0 * safe)
        sign = np.where(theta >= 0.0, 1.0, -1.0)
        # hypot: theta**2 overflows once apq is denormal
        t = np.where(active, sign / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    col_p = a[..., :, p].copy()
    col_q = a[..., :, q].copy()
    new_p = c[..., None] * col_p - s[..., None] * col_q
    new_q = s[..., None] * col_p + c[..., None] * col_q
    a[..., :, p] = new_p
    a[..., :, q] = new_q
    a[..., p, :] = new_p
    a[..., q, :] = new_q
    a[..., p, p] = app - t * apq
    a[..., q, q] = aqq + t * apq
    a[..., p, q] = 0.0
    a[..., q, p] = 0.0


def min_eigenvalues(a) -> np.ndarray:
    """Smallest eigenvalue of each matrix in a stack."""
    return jacobi_eigenvalues(a)[..., 0]


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of one symmetric matrix."""
    a = as_symmetric(a)
    if a.ndim != 2:
        raise ValueError("expected a single matrix")
    return float(min_eigenvalues(a))
