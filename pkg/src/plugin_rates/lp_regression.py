"""
Local polynomial regression LP(l) and the eigenvalue-guarded estimator.

For a query x the estimator fits, by kernel-weighted least squares, a
polynomial of degree l = floor*(beta) (largest integer strictly below beta) to
the labels and reports its constant coefficient. The fit is computed from
the rescaled moment matrix

    Bbar[s1, s2] = 1/(n h^d) sum_i ((X_i - x)/h)^(s1+s2) K((X_i - x)/h)

and the matching right-hand side; the constant coefficient of the rescaled
solution equals the one of the raw system ``Q T = V`` because the two
differ by the diagonal scaling diag(h^-|s|).

The guarded estimator returns the fitted value clipped to [0, 1] when the
smallest eigenvalue of Bbar exceeds 1/log(n), and 0 otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import gammaln

from . import numkit
from .dataset import Dataset
from .errors import InvalidSampleSize

SINGULAR_EIG_TOL = 1e-12
# entries of the (queries x samples) work arrays per chunk
_CHUNK_ENTRIES = 2_000_000


@lru_cache(maxsize=None)
def _basis(l: int, d: int) -> tuple:
    idx = [s for s in product(range(l + 1), repeat=d) if sum(s) <= l]
    idx.sort(key=lambda s: (sum(s), tuple(-c for c in s)))
    return tuple(idx)


def multi_index_basis(l: int, d: int) -> list[tuple[int, ...]]:
    """All multi-indices s in N^d with |s| <= l, in graded lexicographic order.

    >>> multi_index_basis(1, 2)
    [(0, 0), (1, 0), (0, 1)]
    """
    if l < 0 or d < 1:
        raise ValueError("need l >= 0 and d >= 1")
    return list(_basis(int(l), int(d)))


def degree_for(beta: float) -> int:
    """Largest integer strictly less than ``beta``."""
    if not beta > 0 or math.isinf(beta):
        raise ValueError(f"beta must be positive and finite, got {beta}")
    return math.ceil(beta) - 1


def unit_ball_volume(d: int) -> float:
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0))


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel: ``"gaussian"`` or ``"uniform"`` (normalized ball indicator).

    Both integrate to one, are bounded, and have all moments finite.
    """

    kind: str = "gaussian"
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("kernel radius must be positive")

    def eval_sq(self, r2: np.ndarray, d: int) -> np.ndarray:
        """Kernel value from squared norms ``||u||^2``."""
        if self.kind == "gaussian":
            return (2.0 * math.pi) ** (-0.5 * d) * np.exp(-0.5 * r2)
        vol = unit_ball_volume(d) * self.radius ** d
        return np.where(r2 <= self.radius * self.radius, 1.0 / vol, 0.0)

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return self.eval_sq(np.einsum("ij,ij->i", u, u), u.shape[1])

    def lower_bound_constant(self, d: int) -> float:
        """A constant c > 0 with K(u) >= c on the ball ||u|| <= c."""
        if self.kind == "gaussian":
            # peak/2 is dominated on ||u|| <= c whenever c <= 1
            return min(0.1, 0.5 * (2.0 * math.pi) ** (-0.5 * d))
        return min(self.radius, 1.0 / (unit_ball_volume(d) * self.radius ** d))


GAUSSIAN = KernelSpec("gaussian")


@dataclass(frozen=True)
class LPConfig:
    """Smoothness ``beta`` (sets the degree), bandwidth and kernel.

    ``sample_size_hint`` overrides the n used in the 1/log(n) guard; by
    default the dataset size is used.
    """

    beta: float
    bandwidth: float
    kernel: KernelSpec = GAUSSIAN
    sample_size_hint: int | None = None

    def __post_init__(self):
        degree_for(self.beta)
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def degree(self) -> int:
        return degree_for(self.beta)


@dataclass(frozen=True, eq=False)
class LocalFit:
    x: np.ndarray
    basis: tuple
    bbar: np.ndarray
    rhs: np.ndarray
    lambda_min: float
    z_columns: np.ndarray | None = None


def default_bandwidth(n: int, beta: float, d: int, c_h: float = 1.0) -> float:
    """``c_h * n**(-1/(2 beta + d))``."""
    if n < 1 or not beta > 0 or not c_h > 0:
        raise ValueError("need n >= 1, beta > 0, c_h > 0")
    return c_h * n ** (-1.0 / (2.0 * beta + d))


def _as_queries(x, d: int) -> np.ndarray:
    q = np.asarray(x, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    elif q.ndim == 1:
        q = q.reshape(1, -1) if q.shape[0] == d else q.reshape(-1, 1)
    if q.shape[1] != d:
        raise ValueError(f"query dimension {q.shape[1]} does not match data dimension {d}")
    return q


def local_systems(data: Dataset, queries, cfg: LPConfig):
    """Rescaled systems ``(Bbar, rhs)`` for a stack of query points.

    Returns arrays of shapes ``(Q, M, M)`` and ``(Q, M)``.
    """
    queries = _as_queries(queries, data.d)
    n, d = data.x.shape
    h = cfg.bandwidth
    l = cfg.degree
    basis = _basis(l, d)
    m = len(basis)
    sums = sorted({tuple(a + b for a, b in zip(s1, s2)) for s1 in basis for s2 in basis})
    y = data.y.astype(float)
    norm = 1.0 / (n * h ** d)
    nq = queries.shape[0]
    bbar = np.empty((nq, m, m))
    rhs = np.empty((nq, m))
    chunk = max(1, _CHUNK_ENTRIES // n)
    for lo in range(0, nq, chunk):
        qs = queries[lo:lo + chunk]
        u = (data.x[None, :, :] - qs[:, None, :]) / h
        kern = cfg.kernel.eval_sq(np.einsum("qnj,qnj->qn", u, u), d)
        powers = [[None] * (2 * l + 1) for _ in range(d)]
        for j in range(d):
            powers[j][0] = None
            if 2 * l >= 1:
                powers[j][1] = u[:, :, j]
            for e in range(2, 2 * l + 1):
                powers[j][e] = powers[j][e - 1] * u[:, :, j]
        moments = {}
        weighted_y = {}
        for t in sums:
            w = kern
            for j, e in enumerate(t):
                if e:
                    w = w * powers[j][e]
            moments[t] = w.sum(axis=1) * norm
            if sum(t) <= l:
                weighted_y[t] = (w @ y) * norm
        for a, s1 in enumerate(basis):
            rhs[lo:lo + chunk, a] = weighted_y[s1]
            for b, s2 in enumerate(basis):
                bbar[lo:lo + chunk, a, b] = moments[tuple(p + q for p, q in zip(s1, s2))]
    return bbar, rhs


def build_local_system(data: Dataset, x, cfg: LPConfig, keep_design: bool = False) -> LocalFit:
    """Assemble Bbar, the right-hand side and lambda_min(Bbar) at one point.

    With ``keep_design`` the unscaled design values
    ``Z[i, s] = (X_i - x)^s sqrt(K((X_i - x)/h))`` are retained too.
    """
    q = _as_queries(x, data.d)
    if q.shape[0] != 1:
        raise ValueError("build_local_system takes a single query point")
    bbar, rhs = local_systems(data, q, cfg)
    lam = float(numkit.min_eigenvalues(bbar[0]))
    z = None
    if keep_design:
        z = raw_local_system(data, q[0], cfg)[2]
    return LocalFit(q[0].copy(), _basis(cfg.degree, data.d), bbar[0], rhs[0], lam, z)


def raw_local_system(data: Dataset, x, cfg: LPConfig):
    """Unscaled ``(Q, V, Z)`` at one point, with ``Q = Z^T Z`` by construction of Z.

    ``Q`` is accumulated directly from its defining sum, not from Z, so the
    identity is a genuine check.
    """
    x = _as_queries(x, data.d)[0]
    basis = _basis(cfg.degree, data.d)
    diff = data.x - x
    u = diff / cfg.bandwidth
    kern = cfg.kernel.eval_sq(np.einsum("nj,nj->n", u, u), data.d)
    mono = np.stack([np.prod(diff ** np.array(s), axis=1) for s in basis], axis=1)
    m = len(basis)
    q = np.empty((m, m))
    for a, s1 in enumerate(basis):
        for b, s2 in enumerate(basis):
            e = np.array(s1) + np.array(s2)
            q[a, b] = np.sum(np.prod(diff ** e, axis=1) * kern)
    v = mono.T @ (data.y * kern)
    z = mono * np.sqrt(kern)[:, None]
    return q, v, z


def lp_fit_many(data: Dataset, queries, cfg: LPConfig):
    """LP(l) values at many queries.

    Returns
    -------
    values : ndarray
        Constant coefficient of the local fit; 0 where the fit is not unique.
    lambda_min : ndarray
        Smallest eigenvalue of Bbar at each query.
    """
    bbar, rhs = local_systems(data, queries, cfg)
    lam = numkit.min_eigenvalues(bbar)
    coef, singular = numkit.solve_sym_batch(bbar, rhs)
    values = coef[:, 0]
    values[singular | (lam <= SINGULAR_EIG_TOL)] = 0.0
    return values, lam


def lp_estimate(data: Dataset, x, cfg: LPConfig) -> float:
    """LP(l) estimate at a single point (0 when the minimizer is not unique)."""
    values, _ = lp_fit_many(data, _as_queries(x, data.d), cfg)
    return float(values[0])


def _guard_n(data: Dataset, cfg: LPConfig) -> int:
    n = cfg.sample_size_hint if cfg.sample_size_hint is not None else data.n
    if n < 3:
        raise InvalidSampleSize(f"the 1/log(n) guard needs n >= 3, got n = {n}")
    return n


def eta_star_many(data: Dataset, queries, cfg: LPConfig):
    """Guarded, clipped estimates at many queries.

    Returns ``(values, guarded)`` where ``guarded`` marks queries whose
    smallest eigenvalue did not exceed 1/log(n) (value forced to 0).
    """
    n = _guard_n(data, cfg)
    values, lam = lp_fit_many(data, queries, cfg)
    guarded = ~(lam > 1.0 / math.log(n))
    return np.where(guarded, 0.0, np.clip(values, 0.0, 1.0)), guarded


def eta_star(data: Dataset, x, cfg: LPConfig) -> float:
    values, _ = eta_star_many(data, _as_queries(x, data.d), cfg)
    return float(values[0])
