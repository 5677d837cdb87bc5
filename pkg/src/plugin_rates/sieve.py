"""
Hybrid plug-in/ERM classification over a finite net of regression functions.

A net is the set of all piecewise polynomials on the k^d congruent cells of
a cube whose coefficients lie on a quantization grid. Coefficients refer to
the local monomials ((x - c)/s)^a, c the cell center and s its half-width,
so every coefficient range is independent of the cell size. The constant
term ranges over {0, tau, 2 tau, ..., 1}; higher terms over the multiples of
tau in [-coef_bound, coef_bound].

Members are indexed in mixed radix: cell 0 is the most significant digit,
and within a cell the choices run lexicographically over the coefficient
vector (constant term first).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from numbers import Rational
from typing import Iterator

import numpy as np

from .classify import DecisionRule, as_points
from .dataset import Dataset
from .errors import NetBudgetExceeded
from .lp_regression import degree_for, multi_index_basis

DEFAULT_BUDGET = 10 ** 6
# smallest epsilon for which the recorded entropy constant is certified
A_PRIME_EPS_MIN = 0.05


def exact(v):
    """``Fraction`` for rational input (ints, Fractions), float otherwise."""
    if isinstance(v, Rational):
        return Fraction(v)
    return float(v)


@dataclass(frozen=True)
class SieveConfig:
    alpha: float
    rho: float
    p: float = math.inf
    c_eps: float = 1.0

    def __post_init__(self):
        if not self.rho > 0 or not self.alpha >= 0:
            raise ValueError("need rho > 0 and alpha >= 0")
        if not self.p >= 1:
            raise ValueError("need p in [1, inf]")
        if not self.c_eps > 0:
            raise ValueError("c_eps must be positive")


def epsilon_exponent(alpha, rho, p=math.inf):
    """e with eps_n = c n^-e: 1/(2+alpha+rho) for p = inf, else (p+alpha)/((2+alpha)p + rho(p+alpha))."""
    a, r = exact(alpha), exact(rho)
    if math.isinf(p):
        return 1 / (2 + a + r)
    pp = exact(p)
    return (pp + a) / ((2 + a) * pp + r * (pp + a))


def epsilon_schedule(n: int, cfg: SieveConfig) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return cfg.c_eps * n ** -float(epsilon_exponent(cfg.alpha, cfg.rho, cfg.p))


@dataclass(frozen=True)
class NetSpec:
    """Hölder ball (beta, lip) on the cube [lower, upper]^d and the net resolution.

    ``degree`` defaults to the largest integer below beta. ``epsilon`` and
    ``p`` record the covering target; they do not enter the construction.
    """

    beta: float
    lip: float
    d: int = 1
    lower: float = 0.0
    upper: float = 1.0
    cells_per_axis: int = 1
    tau: float = 0.25
    coef_bound: float = 1.0
    epsilon: float = 0.5
    p: float = math.inf
    size_budget: int = DEFAULT_BUDGET
    degree: int | None = None

    def __post_init__(self):
        if self.cells_per_axis < 1 or not self.tau > 0 or not self.epsilon > 0:
            raise ValueError("need cells_per_axis >= 1, tau > 0, epsilon > 0")
        if self.d < 1 or not self.upper > self.lower:
            raise ValueError("need d >= 1 and a nonempty cube")
        if not (self.beta > 0 and self.lip > 0) or self.coef_bound < 0:
            raise ValueError("need beta > 0, L > 0, coef_bound >= 0")
        if self.degree is None:
            object.__setattr__(self, "degree", degree_for(self.beta))
        elif self.degree < 0:
            raise ValueError("degree must be >= 0")


def sized_spec(beta: float, lip: float, epsilon: float, d: int = 1, **kw) -> NetSpec:
    """Net resolution from the target epsilon.

    Cell side (epsilon/L)^(1/beta), rounded down to a dyadic split of the
    cube, and tau = epsilon/2.
    """
    lower, upper = kw.get("lower", 0.0), kw.get("upper", 1.0)
    side = (epsilon / lip) ** (1.0 / beta)
    k = 1 << max(0, math.ceil(math.log2((upper - lower) / side) - 1e-12))
    return NetSpec(beta=beta, lip=lip, d=d, cells_per_axis=k, tau=epsilon / 2.0, epsilon=epsilon, **kw)


def _level_grid(lo: float, hi: float, tau: float) -> np.ndarray:
    j_lo = math.ceil(lo / tau - 1e-9)
    j_hi = math.floor(hi / tau + 1e-9)
    return np.arange(j_lo, j_hi + 1) * tau


@dataclass(frozen=True, eq=False)
class NetMember:
    """One piecewise polynomial: ``coefs[c]`` is the coefficient vector on cell c."""

    net: "Net"
    index: int
    coefs: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = as_points(x)
        cell, local = self.net.locate(x)
        mono = self.net.monomials(local)
        vals = np.einsum("nm,nm->n", mono, self.coefs[cell])
        return np.clip(vals, 0.0, 1.0)

    def rule(self) -> DecisionRule:
        return DecisionRule(lambda x: self(x) >= 0.5, "net member")


@dataclass(frozen=True, eq=False)
class Net:
    spec: NetSpec
    basis: tuple = field(init=False)
    choices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = self.spec
        basis = tuple(multi_index_basis(s.degree, s.d))
        levels = [_level_grid(0.0, 1.0, s.tau)]
        levels += [_level_grid(-s.coef_bound, s.coef_bound, s.tau)] * (len(basis) - 1)
        choices = np.array(list(product(*levels)), dtype=float).reshape(-1, len(basis))
        choices.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "choices", choices)

    @property
    def n_cells(self) -> int:
        return self.spec.cells_per_axis ** self.spec.d

    @property
    def per_cell(self) -> int:
        return self.choices.shape[0]

    @cached_property
    def count(self) -> int:
        return self.per_cell ** self.n_cells

    @property
    def log_count(self) -> float:
        return self.n_cells * math.log(self.per_cell)

    def __len__(self) -> int:
        return self.count

    def digits(self, index: int) -> list[int]:
        """Per-cell choice indices of a member, cell 0 first."""
        if not 0 <= index < self.count:
            raise IndexError(f"member index {index} outside [0, {self.count})")
        out = []
        for _ in range(self.n_cells):
            index, r = divmod(index, self.per_cell)
            out.append(r)
        return out[::-1]

    def index_of(self, digits) -> int:
        idx = 0
        for dgt in digits:
            idx = idx * self.per_cell + int(dgt)
        return idx

    def member(self, index: int) -> NetMember:
        return NetMember(self, index, self.choices[self.digits(index)])

    def __iter__(self) -> Iterator[NetMember]:
        for index in range(self.count):
            yield self.member(index)

    def locate(self, x: np.ndarray):
        """Cell index and local coordinates ((x - center)/half_width) of each point.

        Points outside the cube use the nearest boundary cell.
        """
        s = self.spec
        k = s.cells_per_axis
        width = (s.upper - s.lower) / k
        coords = np.clip(np.floor((x - s.lower) / width), 0, k - 1).astype(np.int64)
        center = s.lower + (coords + 0.5) * width
        local = (x - center) / (width / 2.0)
        cell = coords @ (k ** np.arange(s.d - 1, -1, -1))
        return cell, local

    def monomials(self, local: np.ndarray) -> np.ndarray:
        cols = [np.prod(local ** np.array(a), axis=1) for a in self.basis]
        return np.stack(cols, axis=1)


def build_net(spec: NetSpec) -> Net:
    """The net of ``spec``; raises NetBudgetExceeded before any enumeration if it is too large."""
    net = Net(spec)
    if net.log_count > math.log(spec.size_budget) + 1e-12 or net.count > spec.size_budget:
        raise NetBudgetExceeded(net.log_count, spec.size_budget)
    return net


def empirical_error_count(f, data: Dataset) -> int:
    return int(np.count_nonzero(f(data.x) != data.y))


def empirical_risk(f, data: Dataset) -> float:
    """Fraction of misclassified samples, computed as an integer count over n."""
    return empirical_error_count(f, data) / data.n


@dataclass(frozen=True)
class SieveFit:
    member: NetMember
    index: int
    empirical_risk: float
    errors: int


def select_sieve(data: Dataset, net: Net) -> SieveFit:
    """Member minimizing the empirical risk of its plug-in rule, smallest index among ties.

    The error count is a sum of per-cell counts and the members are the
    product of per-cell choices, so the minimizers are exactly the products
    of per-cell minimizers. The smallest index among them takes the
    smallest minimizing choice in every cell.
    """
    if data.d != net.spec.d:
        raise ValueError(f"dataset dimension {data.d} does not match net dimension {net.spec.d}")
    cell, local = net.locate(data.x)
    mono = net.monomials(local)
    labels = data.y.astype(bool)
    digits = np.zeros(net.n_cells, dtype=np.int64)
    total = 0
    for c in np.unique(cell):
        sel = cell == c
        vals = np.clip(net.choices @ mono[sel].T, 0.0, 1.0)
        errs = np.count_nonzero((vals >= 0.5) != labels[sel][None, :], axis=1)
        best = int(np.argmin(errs))
        digits[c] = best
        total += int(errs[best])
    index = net.index_of(digits)
    member = NetMember(net, index, net.choices[digits])
    return SieveFit(member, index, total / data.n, total)


def brute_force_select(data: Dataset, net: Net) -> SieveFit:
    """Reference argmin by scanning every member in canonical order."""
    best = None
    for member in net:
        errs = empirical_error_count(member.rule(), data)
        if best is None or errs < best[1]:
            best = (member, errs)
    member, errs = best
    return SieveFit(member, member.index, errs / data.n, errs)


def implied_a_prime(net: Net, rho: float) -> float:
    """log(card) * epsilon^rho for the net's own epsilon."""
    return net.log_count * net.spec.epsilon ** rho


def recorded_a_prime(lip: float, eps_min: float = A_PRIME_EPS_MIN) -> float:
    """Entropy constant for the sized degree-0 nets in d = 1 (rho = 1).

    The sized net has at most 2L/eps cells and floor(2/eps) + 1 levels, so
    log card <= (2L/eps) log(2/eps + 1) <= A'/eps for every eps >= eps_min.
    The slowly growing log factor is why A' depends on eps_min.
    """
    return 2.0 * lip * math.log(2.0 / eps_min + 1.0)
