"""
Rate experiments: sweeps over n, log-log fits, theoretical exponents and
the concentration, exponential-decay and hypercube dominance probes.

Every random draw is seeded by ``mix64(base_seed, n, replicate, purpose)``,
a splitmix64 chain, so a task's seed depends only on its own coordinates.
Adding replicates or sample sizes never changes existing results, and the
worker count does not affect the output.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable

import numpy as np

from .classify import DecisionRule, _mean_se, constant_rule, excess_risk_mc, plug_in
from .dataset import Dataset, format_float
from .errors import InsufficientPoints, PluginRatesError, TooManyVertices
from .lp_regression import GAUSSIAN, KernelSpec, LPConfig, default_bandwidth, eta_star_many
from .sieve import SieveConfig, build_net, epsilon_schedule, exact, select_sieve, sized_spec
from .synth import HypercubeOracle, HypercubeParams, assouad_bound

MASK64 = (1 << 64) - 1
PURPOSES = {"train": 1, "mc": 2, "oracle": 3, "probe": 4, "vertex": 5}
MAX_VERTEX_BITS = 12


# ----------------------------------------------------------------------------
# exponents


def theoretical_exponent(mode: str, alpha, beta=None, d=None, rho=None, p=None):
    """Rate exponent e (excess risk ~ n^-e) and whether e > 1.

    ``strong``: beta(1+alpha)/(2beta+d); ``mild``: (1+alpha)beta/((2+alpha)beta+d);
    ``sieve_inf``: (1+alpha)/(2+alpha+rho); ``sieve_p``: (1+alpha)p/((2+alpha)p+rho(p+alpha)).
    Rational inputs give a ``Fraction``.
    """
    a = exact(alpha)
    if mode == "strong":
        b, dd = exact(beta), exact(d)
        e = b * (1 + a) / (2 * b + dd)
    elif mode == "mild":
        b, dd = exact(beta), exact(d)
        e = (1 + a) * b / ((2 + a) * b + dd)
    elif mode == "sieve_inf":
        e = (1 + a) / (2 + a + exact(rho))
    elif mode == "sieve_p":
        pp, r = exact(p), exact(rho)
        e = (1 + a) * pp / ((2 + a) * pp + r * (pp + a))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return e, bool(e > 1)


# ----------------------------------------------------------------------------
# seeds


def _splitmix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(*parts) -> int:
    """Fold integers (or purpose names) into one 64-bit seed via chained splitmix64."""
    h = 0
    for part in parts:
        if isinstance(part, str):
            part = PURPOSES[part]
        h = _splitmix(h ^ (int(part) & MASK64))
    return h


def derived_seed(base_seed: int, n: int, replicate: int, purpose: str) -> int:
    return mix64(base_seed, n, replicate, purpose)


# ----------------------------------------------------------------------------
# classifiers


@dataclass(frozen=True)
class LPPlugin:
    """Plug-in rule of the guarded LP estimator.

    The bandwidth is ``bandwidth`` when given, else c_h n^(-1/(2 beta + d)).
    """

    beta: float
    c_h: float = 1.0
    bandwidth: float | None = None
    kernel: KernelSpec = GAUSSIAN
    name: str = "lp"

    def config(self, n: int, d: int) -> LPConfig:
        h = self.bandwidth if self.bandwidth is not None else default_bandwidth(n, self.beta, d, self.c_h)
        return LPConfig(self.beta, h, self.kernel)

    def fit(self, data: Dataset, oracle=None) -> DecisionRule:
        cfg = self.config(data.n, data.d)
        return plug_in(lambda x: eta_star_many(data, x, cfg)[0])


@dataclass(frozen=True)
class SievePlugin:
    """Hybrid plug-in/ERM rule over a net sized for eps_n."""

    beta: float
    lip: float
    alpha: float
    rho: float
    p: float = math.inf
    c_eps: float = 1.0
    lower: float = 0.0
    upper: float = 1.0
    coef_bound: float = 1.0
    size_budget: int = 10 ** 300
    name: str = "sieve"

    def fit(self, data: Dataset, oracle=None) -> DecisionRule:
        eps = epsilon_schedule(data.n, SieveConfig(self.alpha, self.rho, self.p, self.c_eps))
        spec = sized_spec(self.beta, self.lip, eps, d=data.d, lower=self.lower, upper=self.upper,
                          coef_bound=self.coef_bound, p=self.p, size_budget=self.size_budget)
        return select_sieve(data, build_net(spec)).member.rule()


@dataclass(frozen=True)
class OracleBayes:
    name: str = "bayes"

    def fit(self, data: Dataset, oracle=None) -> DecisionRule:
        return DecisionRule(oracle.bayes, "oracle Bayes")


@dataclass(frozen=True)
class ConstantLabel:
    value: int = 0
    name: str = "constant"

    def fit(self, data: Dataset, oracle=None) -> DecisionRule:
        return constant_rule(self.value)


def oracle_at(oracle, n: int, seed: int):
    """Resolve sample-size dependent families (anything with ``oracle_for``)."""
    if hasattr(oracle, "oracle_for"):
        return oracle.oracle_for(n, seed)
    return oracle


# ----------------------------------------------------------------------------
# log-log fits


@dataclass(frozen=True)
class LogLogFit:
    """OLS of log risk on log n. Unpacks as ``(slope, intercept, r_squared)``."""

    slope: float
    intercept: float
    r_squared: float
    slope_se: float
    used: int
    masked: int

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r_squared))


def _ols(x: np.ndarray, y: np.ndarray):
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise InsufficientPoints("all abscissae are equal")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    se = math.sqrt(ss_res / (x.size - 2) / sxx) if x.size > 2 else math.nan
    return slope, intercept, r2, se


def fit_loglog(ns, risks) -> LogLogFit:
    """Fit log(risk) = intercept + slope log(n) over the strictly positive risks."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    keep = (risks > 0) & np.isfinite(risks)
    if np.count_nonzero(keep) < 2:
        raise InsufficientPoints(f"{np.count_nonzero(keep)} positive risks, need 2")
    s, i, r2, se = _ols(np.log(ns[keep]), np.log(risks[keep]))
    return LogLogFit(s, i, r2, se, int(keep.sum()), int((~keep).sum()))


def fit_loglinear(ns, risks) -> LogLogFit:
    """Fit log(risk) = intercept + slope n over the strictly positive risks."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    keep = (risks > 0) & np.isfinite(risks)
    if np.count_nonzero(keep) < 2:
        raise InsufficientPoints(f"{np.count_nonzero(keep)} positive risks, need 2")
    s, i, r2, se = _ols(ns[keep], np.log(risks[keep]))
    return LogLogFit(s, i, r2, se, int(keep.sum()), int((~keep).sum()))


# ----------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepConfig:
    """``theory`` holds the keyword arguments of :func:`theoretical_exponent`, or None."""

    oracle: object
    classifier: object
    n_grid: tuple
    replicates: int = 1
    mc_points: int = 4000
    base_seed: int = 0
    theory: dict | None = None
    workers: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValueError("n_grid must be a nonempty strictly increasing sequence of positive integers")
        if self.replicates < 1 or self.mc_points < 1 or self.workers < 1:
            raise ValueError("replicates, mc_points and workers must be >= 1")
        object.__setattr__(self, "n_grid", grid)


@dataclass(frozen=True)
class RateRow:
    n: int
    mean_excess: float
    se: float
    replicates: int
    values: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class RateResult:
    rows: tuple
    fit: LogLogFit | None
    theoretical_exponent: float | Fraction | None
    mode: str | None
    superfast: bool | None

    @property
    def slope(self) -> float:
        return self.fit.slope if self.fit else math.nan

    @property
    def intercept(self) -> float:
        return self.fit.intercept if self.fit else math.nan

    @property
    def r_squared(self) -> float:
        return self.fit.r_squared if self.fit else math.nan

    @property
    def masked(self) -> int:
        return sum(1 for r in self.rows if not r.mean_excess > 0)


def _replicate_task(args):
    oracle, classifier, n, rep, mc, base = args
    try:
        law = oracle_at(oracle, n, derived_seed(base, n, rep, "oracle"))
        data = law.sample(derived_seed(base, n, rep, "train"), n)
        rule = classifier.fit(data, law)
        return excess_risk_mc(rule, law, mc, derived_seed(base, n, rep, "mc"))
    except PluginRatesError as exc:
        exc.args = (f"n={n}, replicate={rep}: {exc}",)
        raise


def _aggregate(n, results) -> RateRow:
    means = [m for m, _ in results]
    if len(results) == 1:
        mean, se = results[0]
    else:
        mean, se = _mean_se(means)
    return RateRow(n, mean, se, len(results), tuple(means))


def summarize(rows, theory: dict | None) -> RateResult:
    try:
        fit = fit_loglog([r.n for r in rows], [r.mean_excess for r in rows])
    except InsufficientPoints:
        fit = None
    expo, fast, mode = None, None, None
    if theory:
        expo, fast = theoretical_exponent(**theory)
        mode = theory["mode"]
    return RateResult(tuple(rows), fit, expo, mode, fast)


def run_sweep(cfg: SweepConfig, on_row: Callable[[list], None] | None = None) -> RateResult:
    """Mean Monte Carlo excess risk per n, the fitted slope and the theoretical exponent.

    ``on_row`` receives the list of completed rows after each n.
    A slope of NaN means fewer than two sample sizes had positive risk.
    """
    rows = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for n in cfg.n_grid:
            tasks = [(cfg.oracle, cfg.classifier, n, r, cfg.mc_points, cfg.base_seed) for r in range(cfg.replicates)]
            results = list(pool.map(_replicate_task, tasks)) if pool else [_replicate_task(t) for t in tasks]
            rows.append(_aggregate(n, results))
            if on_row is not None:
                on_row(list(rows))
    finally:
        if pool is not None:
            pool.shutdown()
    return summarize(rows, cfg.theory)


RATE_COLUMNS = ("n", "mean_excess", "se", "replicates", "theoretical_exponent", "fitted_slope", "r_squared")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return format_float(float(v))
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format_float(v)


def rate_csv(result: RateResult, header: str | None = None, partial: bool = False) -> str:
    lines = [header] if header else []
    if partial:
        lines.append("# partial")
    lines.append(f"# masked_zero_risks={result.masked}")
    lines.append(",".join(RATE_COLUMNS))
    for r in result.rows:
        lines.append(",".join(_fmt(v) for v in (r.n, r.mean_excess, r.se, r.replicates, result.theoretical_exponent,
                                                 result.slope, result.r_squared)))
    return "\n".join(lines) + "\n"


def gnuplot_dat(xs, ys, header: str | None = None) -> str:
    lines = [header] if header else []
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in zip(xs, ys)]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class ConcentrationCell:
    n: int
    bandwidth: float
    delta: float
    point: tuple
    p_hat: float
    se: float

    @property
    def exponent_arg(self) -> float:
        """n h^d delta^2."""
        return self.n * self.bandwidth ** len(self.point) * self.delta ** 2


@dataclass(frozen=True)
class ConcentrationResult:
    cells: tuple
    fit: LogLogFit | None


def concentration_probe(oracle, lp: LPPlugin, x_list, delta_grid, n_grid, reps: int, seed: int) -> ConcentrationResult:
    """Fraction of replicates with |eta*(x) - eta(x)| >= delta per (n, delta, x).

    The companion fit regresses log p_hat on n h^d delta^2 over cells with
    p_hat > 0.
    """
    xq = np.atleast_2d(np.asarray(x_list, dtype=float))
    if xq.shape[1] != oracle.d:
        xq = xq.reshape(-1, oracle.d)
    deltas = np.asarray(delta_grid, dtype=float)
    if np.any(deltas <= 0):
        raise ValueError("deltas must be positive")
    truth = oracle.eta(xq)
    cells = []
    for n in n_grid:
        cfg = lp.config(n, oracle.d)
        hits = np.zeros((deltas.size, xq.shape[0]), dtype=np.int64)
        for r in range(reps):
            data = oracle.sample(derived_seed(seed, n, r, "probe"), n)
            err = np.abs(eta_star_many(data, xq, cfg)[0] - truth)
            hits += err[None, :] >= deltas[:, None]
        p = hits / reps
        for i, dl in enumerate(deltas):
            for j in range(xq.shape[0]):
                cells.append(ConcentrationCell(int(n), cfg.bandwidth, float(dl), tuple(float(v) for v in xq[j]),
                                               float(p[i, j]), math.sqrt(p[i, j] * (1 - p[i, j]) / reps)))
    args = np.array([c.exponent_arg for c in cells])
    ps = np.array([c.p_hat for c in cells])
    try:
        fit = fit_loglinear(args, ps)
    except InsufficientPoints:
        fit = None
    return ConcentrationResult(tuple(cells), fit)


CONCENTRATION_COLUMNS = ("n", "bandwidth", "delta", "point", "n_hd_delta2", "p_hat", "se")


def concentration_csv(res: ConcentrationResult, header: str | None = None) -> str:
    lines = [header] if header else []
    if res.fit:
        lines.append(f"# fit log_p_hat ~ n_hd_delta2: slope={_fmt(res.fit.slope)} r_squared={_fmt(res.fit.r_squared)}")
    lines.append(",".join(CONCENTRATION_COLUMNS))
    for c in res.cells:
        pt = " ".join(_fmt(v) for v in c.point)
        lines.append(",".join([str(c.n), _fmt(c.bandwidth), _fmt(c.delta), pt, _fmt(c.exponent_arg),
                               _fmt(c.p_hat), _fmt(c.se)]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DecayResult:
    rows: tuple
    fit: LogLogFit | None


def exponential_probe(oracle, lp: LPPlugin, n_grid, reps: int, mc_points: int, seed: int) -> DecayResult:
    """Mean excess risk per n at a fixed bandwidth, with a fit of log risk against n."""
    if lp.bandwidth is None:
        raise ValueError("the exponential probe needs a fixed bandwidth")
    cfg = SweepConfig(oracle, lp, tuple(n_grid), reps, mc_points, seed)
    res = run_sweep(cfg)
    try:
        fit = fit_loglinear([r.n for r in res.rows], [r.mean_excess for r in res.rows])
    except InsufficientPoints:
        fit = None
    return DecayResult(res.rows, fit)


def decay_csv(res: DecayResult, header: str | None = None) -> str:
    lines = [header] if header else []
    if res.fit:
        lines.append(f"# fit log_risk ~ n: slope={_fmt(res.fit.slope)} r_squared={_fmt(res.fit.r_squared)}")
    lines.append("n,mean_excess,se,replicates")
    lines += [",".join(_fmt(v) for v in (r.n, r.mean_excess, r.se, r.replicates)) for r in res.rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AssouadResult:
    sup_excess: float
    sup_se: float
    worst_sigma: tuple
    bound: float
    dominates: bool
    per_vertex: tuple = field(repr=False)


def assouad_check(params: HypercubeParams, classifier, n: int, mc: int, seed: int,
                  reps: int = 1, form: str = "scaled") -> AssouadResult:
    """Worst-case Monte Carlo excess risk over all 2^m sign vectors against the hypercube bound.

    For each vertex the classifier is trained ``reps`` times; the excess is
    averaged over training draws. Dominance means sup + 3 se >= bound.
    """
    if params.m > MAX_VERTEX_BITS:
        raise TooManyVertices(f"m = {params.m} gives 2^{params.m} vertices; limit is m <= {MAX_VERTEX_BITS}")
    per_vertex = []
    for v, sigma in enumerate(product((-1, 1), repeat=params.m)):
        law = HypercubeOracle(params.with_sigma(sigma))
        results = []
        for r in range(reps):
            data = law.sample(mix64(seed, v, r, "train"), n)
            rule = classifier.fit(data, law)
            results.append(excess_risk_mc(rule, law, mc, mix64(seed, v, r, "mc")))
        row = _aggregate(n, results)
        per_vertex.append((sigma, row.mean_excess, row.se))
    worst = max(range(len(per_vertex)), key=lambda i: (per_vertex[i][1], -i))
    sigma, sup, se = per_vertex[worst]
    bound = assouad_bound(params, n, form)
    return AssouadResult(sup, se, sigma, bound, sup + 3.0 * se >= bound, tuple(per_vertex))
