"""
Plug-in rules, risk functionals and comparison inequalities.

Excess risk of a rule f is computed as E[|2 eta(X) - 1| 1{f(X) != f*(X)}]
where f* = 1{eta >= 1/2}. Points with eta = 1/2 never contribute.

Discrete joint laws (finitely many support points with known eta) give
exact risks and serve as brute-force substrates for checking the
comparison inequalities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidAlpha, InvalidLaw


def as_points(x) -> np.ndarray:
    """Coerce to an ``(N, d)`` float array; 0-d and 1-d input means d = 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x[:, None]
    return x


@dataclass(frozen=True)
class MarginParams:
    alpha: float
    c0_margin: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not self.c0_margin > 0:
            raise ValueError("C0 must be > 0")


@dataclass(frozen=True)
class HolderParams:
    beta: float
    lip: float

    def __post_init__(self):
        if not (self.beta > 0 and self.lip > 0):
            raise ValueError("beta and L must be positive")


@dataclass(frozen=True)
class DensityParams:
    """Support regularity ``(c0_reg, r0)`` and density bounds.

    ``mu_min == 0`` encodes the mild density assumption, ``mu_min > 0`` the
    strong one.
    """

    c0_reg: float
    r0: float
    mu_min: float
    mu_max: float
    support: str = ""

    def __post_init__(self):
        if not (0 <= self.mu_min <= self.mu_max and self.mu_max > 0):
            raise ValueError("need 0 <= mu_min <= mu_max, mu_max > 0")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")

    @property
    def strong(self) -> bool:
        return self.mu_min > 0


@dataclass(frozen=True)
class DecisionRule:
    """Deterministic map from points to {0, 1}.

    ``fn`` receives an ``(N, d)`` array and returns N labels.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    tag: str = "custom"

    def __call__(self, x) -> np.ndarray:
        x = as_points(x)
        out = np.asarray(self.fn(x))
        return np.broadcast_to(out, (x.shape[0],)).astype(np.int8)


def plug_in(eta_hat: Callable[[np.ndarray], np.ndarray]) -> DecisionRule:
    """Threshold a regression estimate at 1/2 (ties go to label 1)."""
    return DecisionRule(lambda x: np.asarray(eta_hat(x)) >= 0.5, "plug-in")


def bayes_rule(eta: Callable[[np.ndarray], np.ndarray]) -> DecisionRule:
    return DecisionRule(lambda x: np.asarray(eta(x)) >= 0.5, "oracle Bayes")


def constant_rule(value: int) -> DecisionRule:
    if value not in (0, 1):
        raise ValueError("constant rule must be 0 or 1")
    return DecisionRule(lambda x: np.full(x.shape[0], value), f"constant {value}")


def bayes_completion(f: DecisionRule, eta) -> DecisionRule:
    """The Bayes rule that agrees with ``f`` wherever eta = 1/2."""

    def fn(x):
        e = np.asarray(eta(x))
        return np.where(e == 0.5, f(x), e >= 0.5)

    return DecisionRule(fn, "completion")


@dataclass(frozen=True, eq=False)
class DiscreteJointLaw:
    """Finite support ``points`` with masses ``probs`` and regression values ``eta``."""

    points: np.ndarray
    probs: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        p = np.asarray(self.probs, dtype=float)
        e = np.asarray(self.eta, dtype=float)
        if p.shape != (pts.shape[0],) or e.shape != p.shape:
            raise InvalidLaw("points, probs and eta must have matching lengths")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidLaw("probabilities must be finite and nonnegative")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise InvalidLaw(f"probabilities sum to {math.fsum(p)!r}, not 1")
        if np.any(e < 0) or np.any(e > 1):
            raise InvalidLaw("eta must lie in [0, 1]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "eta", e)

    def bayes(self) -> np.ndarray:
        return (self.eta >= 0.5).astype(np.int8)

    def expect(self, values) -> float:
        return math.fsum(self.probs * np.asarray(values, dtype=float))


class ExactRisks(NamedTuple):
    risk: float
    bayes_risk: float
    excess: float


def exact_risks(f, law: DiscreteJointLaw) -> ExactRisks:
    """Misclassification risk of ``f``, Bayes risk, and excess risk.

    ``f`` is a :class:`DecisionRule` or an array of labels on the support.
    The excess is the |2 eta - 1| form; it agrees with ``risk - bayes_risk``
    up to rounding.
    """
    if not isinstance(law, DiscreteJointLaw):
        raise InvalidLaw("expected a DiscreteJointLaw")
    labels = f(law.points) if callable(f) else np.asarray(f)
    star = law.bayes()
    risk = law.expect(np.where(labels == 1, 1.0 - law.eta, law.eta))
    bayes = law.expect(np.where(star == 1, 1.0 - law.eta, law.eta))
    excess = law.expect(np.abs(2.0 * law.eta - 1.0) * (labels != star))
    return ExactRisks(risk, bayes, excess)


def margin_function(law: DiscreteJointLaw, t) -> np.ndarray:
    """G(t) = P_X(0 < |eta - 1/2| <= t) for each t."""
    gap = np.abs(law.eta - 0.5)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    hit = (gap[None, :] > 0) & (gap[None, :] <= t[:, None])
    return np.array([math.fsum(row) for row in hit * law.probs[None, :]])


def certified_c0(law: DiscreteJointLaw, alpha: float) -> float:
    """Smallest C0 with G(t) <= C0 t^alpha for all t > 0.

    G is a step function, so the supremum of G(t)/t^alpha is attained at
    the realized gaps |eta_j - 1/2| > 0.
    """
    gap = np.abs(law.eta - 0.5)
    levels = np.unique(gap[(gap > 0) & (law.probs > 0)])
    if levels.size == 0:
        return float(np.finfo(float).tiny)
    g = margin_function(law, levels)
    return float(np.max(g / levels ** alpha))


def lp_distance(law: DiscreteJointLaw, a, b, p: float) -> float:
    """L_p(P_X) distance between two functions given by their support values."""
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if math.isinf(p):
        live = law.probs > 0
        return float(np.max(diff[live])) if np.any(live) else 0.0
    return law.expect(diff ** p) ** (1.0 / p)


def excess_risk_mc(f: DecisionRule, oracle, n_mc: int, seed) -> tuple[float, float]:
    """Monte Carlo excess risk of ``f`` against a synthetic oracle.

    Returns the sample mean of |2 eta(X) - 1| 1{f(X) != f*(X)} over
    ``n_mc`` draws of X and its standard error.
    """
    rng = np.random.default_rng(seed)
    x = oracle.sample_x(rng, n_mc)
    eta = oracle.eta(x)
    star = eta >= 0.5
    loss = np.abs(2.0 * eta - 1.0) * (f(x) != star)
    return _mean_se(loss)


def _mean_se(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = math.fsum(values) / values.size
    if values.size < 2:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (values.size - 1)
    return mean, math.sqrt(var / values.size)


def margin_profile(oracle, t_grid, n_mc: int, seed):
    """Empirical G(t) on a grid from one shared sample, with binomial standard errors."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0) or np.any(t <= 0):
        raise ValueError("t_grid must be a nonempty increasing sequence of positives")
    rng = np.random.default_rng(seed)
    x = oracle.sample_x(rng, n_mc)
    gap = np.abs(oracle.eta(x) - 0.5)
    gap = np.sort(gap[gap > 0])
    g = np.searchsorted(gap, t, side="right") / n_mc
    return g, np.sqrt(g * (1.0 - g) / n_mc)


def comparison_bound_sup(dist_inf: float, m: MarginParams) -> float:
    """Excess risk bound 2 C0 ||eta_bar - eta||_inf^(1 + alpha)."""
    if dist_inf < 0:
        raise ValueError("distance must be nonnegative")
    return 2.0 * m.c0_margin * dist_inf ** (1.0 + m.alpha)


def comparison_bound_set(dist_inf: float, m: MarginParams) -> float:
    """Bound C0 ||eta_bar - eta||_inf^alpha on P_X(f_bar != f*, eta != 1/2)."""
    if dist_inf < 0:
        raise ValueError("distance must be nonnegative")
    return m.c0_margin * dist_inf ** m.alpha


def lp_comparison_constant(alpha: float, p: float, c0: float) -> float:
    return 2.0 * (alpha + p) / p * (p / alpha) ** (alpha / (alpha + p)) * c0 ** ((p - 1.0) / (alpha + p))


def comparison_bound_lp(dist_p: float, p: float, m: MarginParams) -> float:
    """Excess risk bound C1(alpha, p) ||eta_bar - eta||_p^(p(1+alpha)/(p+alpha)), alpha > 0."""
    if m.alpha == 0:
        raise InvalidAlpha("the L_p comparison bound needs alpha > 0")
    if not (1 <= p < math.inf) or dist_p < 0:
        raise ValueError("need 1 <= p < inf and a nonnegative distance")
    a = m.alpha
    return lp_comparison_constant(a, p, m.c0_margin) * dist_p ** (p * (1.0 + a) / (p + a))


def lemma61_bound(excess: float, m: MarginParams) -> tuple[float, float]:
    """Bound C d^(alpha/(1+alpha)) on P_X(f != completion of f), with its constant.

    The constant C = (1 + 1/alpha) (alpha C0)^(1/(1+alpha)) comes from
    minimizing C0 t^alpha + d/t over t; returns ``(value, C)``.
    """
    a = m.alpha
    if a == 0:
        raise InvalidAlpha("alpha = 0 gives no nontrivial bound")
    if excess < 0:
        raise ValueError("excess risk must be nonnegative")
    if math.isinf(a):
        return excess, 1.0
    c = (1.0 + 1.0 / a) * (a * m.c0_margin) ** (1.0 / (1.0 + a))
    return c * excess ** (a / (1.0 + a)), c


def decomposition_bound(law: DiscreteJointLaw, eta_hat, delta: float, m: MarginParams) -> float:
    """2 C0 delta^(1+alpha) + 2 E[|eta_hat - eta| 1{|eta_hat - eta| > delta}]."""
    err = np.abs(np.asarray(eta_hat, dtype=float) - law.eta)
    return 2.0 * m.c0_margin * delta ** (1.0 + m.alpha) + 2.0 * law.expect(err * (err > delta))


def corridor_bound(law: DiscreteJointLaw, eta_hat, t0: float) -> float:
    """P_X(|eta_hat - eta| > t0), which dominates the excess risk when G(t0) = 0."""
    err = np.abs(np.asarray(eta_hat, dtype=float) - law.eta)
    return law.expect(err > t0)
