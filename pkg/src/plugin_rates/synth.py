"""
Synthetic oracle distributions with analytically known regression function.

Three families:

* ``make_parabola``: X uniform on a ball, eta(x) = 1/2 - C ||x||^2.
* ``make_corridor``: a law whose two label regions are separated by a band
  of zero X-mass, so |eta - 1/2| stays above t0 on the support.
* the hypercube family of ``HypercubeParams``: 2^m laws indexed by sign
  vectors, built from a smooth bump on a regular grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from . import _series as ser
from .classify import DensityParams, HolderParams, MarginParams, as_points
from .dataset import Dataset
from .errors import CalibrationFailed, ConstraintViolation, DegenerateSupport, RangeViolation
from .lp_regression import degree_for, unit_ball_volume

# ----------------------------------------------------------------------------
# bump function u

TABLE_INTERVALS = 8192
_U1_SHIFT = 64.0  # u1 peaks at exp(-64); rescaling by exp(64) cancels in u


def u1_scaled(t):
    """exp(64) * u1(t), the unnormalized derivative profile of the bump."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.25) & (t < 0.5)
    tt = np.where(inside, t, 0.375)
    val = np.exp(_U1_SHIFT - 1.0 / ((0.5 - tt) * (tt - 0.25)))
    return np.where(inside, val, 0.0)


@dataclass(frozen=True, eq=False)
class BumpTable:
    """Tabulated u(t) on [0, 1/2]: 1 on [0, 1/4], 0 from 1/2 on.

    ``normalizer`` is the integral of ``u1_scaled`` over [1/4, 1/2].
    """

    grid: np.ndarray
    values: np.ndarray
    normalizer: float
    interp: PchipInterpolator = field(repr=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inner = self.interp(np.clip(t, 0.25, 0.5))
        return np.where(t <= 0.25, 1.0, np.where(t >= 0.5, 0.0, inner))


@lru_cache(maxsize=1)
def bump_table() -> BumpTable:
    grid = np.linspace(0.0, 0.5, TABLE_INTERVALS + 1)
    start = TABLE_INTERVALS // 2  # grid[start] == 0.25
    pieces = np.zeros(TABLE_INTERVALS)
    for i in range(start, TABLE_INTERVALS):
        pieces[i], _ = integrate.quad(u1_scaled, grid[i], grid[i + 1], epsabs=0.0, epsrel=1e-12, limit=200)
    tails = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    normalizer = float(tails[start])
    values = tails / normalizer
    values[: start + 1] = 1.0
    values[-1] = 0.0
    values = np.minimum.accumulate(values)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # flat stretches of the table give zero secants, which PCHIP handles
        interp = PchipInterpolator(grid[start:], values[start:])
    return BumpTable(grid, values, normalizer, interp)


def bump_u(t):
    """Smooth nonincreasing bump: exactly 1 on [0, 1/4], exactly 0 on [1/2, inf)."""
    return bump_table()(t)


def _bump_coeffs(t0: np.ndarray, order: int) -> np.ndarray:
    """Taylor coefficients of u at each t0, shape (order + 1, N)."""
    table = bump_table()
    t0 = np.asarray(t0, dtype=float)
    out = np.zeros((order + 1,) + t0.shape)
    out[0] = table(t0)
    if order == 0:
        return out
    inside = (t0 > 0.25) & (t0 < 0.5)
    tt = np.where(inside, t0, 0.375)
    zeros = np.zeros_like(tt)
    a = np.zeros((order,) + tt.shape)
    b = np.zeros_like(a)
    a[0] = 0.5 - tt
    b[0] = tt - 0.25
    if order > 1:
        a[1] = -1.0
        b[1] = 1.0
    poly = ser.mul(a, b)
    expo = -ser.recip(poly)
    expo[0] += _U1_SHIFT
    u1 = ser.exp(expo)
    for k in range(1, order + 1):
        out[k] = np.where(inside, -u1[k - 1] / (k * table.normalizer), zeros)
    return out


def radial_series(y: np.ndarray, e: np.ndarray, order: int) -> np.ndarray:
    """Taylor series in s of u(||y + s e||) for unit directions e, shape (order + 1, N)."""
    y = np.atleast_2d(y)
    e = np.atleast_2d(e)
    rho2 = np.zeros((order + 1, y.shape[0]))
    rho2[0] = np.einsum("ij,ij->i", y, y)
    if order >= 1:
        rho2[1] = 2.0 * np.einsum("ij,ij->i", y, e)
    if order >= 2:
        rho2[2] = 1.0
    r0 = np.sqrt(rho2[0])
    coeffs = _bump_coeffs(r0, order)
    if order == 0:
        return coeffs
    flat = (r0 <= 0.25) | (r0 >= 0.5)
    safe = rho2.copy()
    safe[0] = np.where(flat, 0.1, safe[0])
    rho = ser.sqrt(safe)
    out = ser.compose(coeffs, rho)
    out[1:, flat] = 0.0
    out[0] = coeffs[0]
    return out


def radial_remainder(y, y2, order: int) -> np.ndarray:
    """u(||y2||) minus the degree-``order`` Taylor polynomial of u(||.||) at y."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y2 = np.atleast_2d(np.asarray(y2, dtype=float))
    step = y2 - y
    r = np.sqrt(np.einsum("ij,ij->i", step, step))
    e = step / np.where(r > 0, r, 1.0)[:, None]
    taylor = ser.evaluate(radial_series(y, e, order), r)
    return bump_u(np.sqrt(np.einsum("ij,ij->i", y2, y2))) - taylor


def _certification_pairs(d: int, resolution: int):
    scales = 2.0 ** -np.arange(0, 13)
    if d == 1:
        base = np.linspace(0.0, 0.6, resolution + 1)[:, None]
        dirs = np.array([[1.0], [-1.0]])
    else:
        base = np.stack([np.linspace(0.0, 0.6, resolution // 4 + 1), np.zeros(resolution // 4 + 1)], axis=1)
        ang = np.linspace(0.0, math.pi, 33)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ys, y2s, rs = [], [], []
    for e in dirs:
        for r in scales:
            ys.append(base)
            y2s.append(base + r * e)
            rs.append(np.full(base.shape[0], r))
    return np.concatenate(ys), np.concatenate(y2s), np.concatenate(rs)


def holder_ratio(beta: float, d: int, resolution: int = 1200) -> float:
    """max |u(||y'||) - Taylor_y(y')| / ||y - y'||^beta over a deterministic grid of pairs.

    Radial symmetry reduces any d >= 2 to the plane spanned by y and y'.
    """
    y, y2, r = _certification_pairs(1 if d == 1 else 2, resolution)
    rem = radial_remainder(y, y2, degree_for(beta))
    return float(np.max(np.abs(rem) / r ** beta))


@lru_cache(maxsize=None)
def calibrate_c_phi(beta: float, lip: float, d: int = 1) -> float:
    """Scale C_phi of the bump phi = C_phi u(||.||) so that phi lies in the Hölder ball.

    Halves C_phi from 1 until the certificate passes on the certification
    grid, then applies a 0.9 safety factor.
    """
    if not (beta > 0 and lip > 0):
        raise ValueError("need beta > 0 and L > 0")
    ratio = holder_ratio(beta, d)
    c = 1.0
    while c * ratio > lip:
        c /= 2.0
        if c < 2.0 ** -20:
            raise CalibrationFailed(f"Hölder certificate fails for beta={beta}, L={lip} even at C_phi=2^-20")
    return 0.9 * c


# ----------------------------------------------------------------------------
# grid


def grid_points(q: int, d: int) -> np.ndarray:
    """Cell centers ((2k_1+1)/(2q), ..., (2k_d+1)/(2q)), row-major in k."""
    if q < 1 or d < 1:
        raise ValueError("need q >= 1 and d >= 1")
    ks = np.array(list(product(range(q), repeat=d)), dtype=float)
    return (2.0 * ks + 1.0) / (2.0 * q)


def _grid_coords(x: np.ndarray, q: int) -> np.ndarray:
    # ceil(xq - 1) rounds to the nearest center and sends exact ties to the
    # lower one, i.e. towards the origin
    return np.clip(np.ceil(x * q - 1.0), 0, q - 1).astype(np.int64)


def nearest_grid(x, q: int) -> np.ndarray:
    """Closest grid point to each row of ``x``; ties go to the point closest to 0.

    The grid is a product of 1-d grids with positive coordinates, so the
    coordinatewise rule minimizes the norm among tied candidates and no
    residual tie remains.
    """
    x = as_points(x)
    return (2.0 * _grid_coords(x, q) + 1.0) / (2.0 * q)


def cell_index(x, q: int) -> np.ndarray:
    """Row-major index of the nearest grid point."""
    k = _grid_coords(as_points(x), q)
    d = k.shape[1]
    weights = q ** np.arange(d - 1, -1, -1)
    return k @ weights


# ----------------------------------------------------------------------------
# oracles


class Oracle:
    """A law of (X, Y) with known eta, Bayes rule and structural constants."""

    d: int
    margin: MarginParams
    holder: HolderParams
    density: DensityParams
    descriptor: str = "oracle"

    def sample_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def eta(self, x) -> np.ndarray:
        raise NotImplementedError

    def bayes(self, x) -> np.ndarray:
        return (self.eta(x) >= 0.5).astype(np.int8)

    def sample(self, seed, n: int) -> Dataset:
        rng = np.random.default_rng(seed)
        x = self.sample_x(rng, n)
        y = (rng.random(n) < self.eta(x)).astype(np.int8)
        return Dataset(x, y)

    def params(self) -> dict:
        return {"generator": self.descriptor}


def _uniform_ball(rng, n, d, radius):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(n) ** (1.0 / d))[:, None]


class ParabolaOracle(Oracle):
    def __init__(self, d: int, c_coef: float, radius: float):
        self.d, self.c_coef, self.radius = int(d), float(c_coef), float(radius)
        self.descriptor = "parabola"
        vol = unit_ball_volume(self.d) * self.radius ** self.d
        self.margin = MarginParams(self.d / 2.0, self.c_coef ** (-self.d / 2.0) * self.radius ** (-self.d))
        self.holder = HolderParams(math.inf, max(2.0 * self.c_coef, 1e-300))
        self.density = DensityParams(2.0 ** -self.d, self.radius, 1.0 / vol, 1.0 / vol,
                                     f"ball B(0, {self.radius!r}) in R^{self.d}")

    def sample_x(self, rng, n):
        return _uniform_ball(rng, n, self.d, self.radius)

    def eta(self, x):
        x = as_points(x)
        return 0.5 - self.c_coef * np.einsum("ij,ij->i", x, x)

    def params(self):
        return {"generator": "parabola", "d": self.d, "c_coef": self.c_coef, "radius": self.radius}


def make_parabola(d: int, c_coef: float, radius: float = 1.0) -> ParabolaOracle:
    """X uniform on B(0, radius), eta = 1/2 - c_coef ||x||^2; margin exponent d/2."""
    if d < 1 or not c_coef > 0 or not radius > 0:
        raise ConstraintViolation("need d >= 1, c_coef > 0, radius > 0")
    if c_coef * radius ** 2 > 0.5:
        raise RangeViolation(f"eta leaves [0, 1]: c_coef * radius^2 = {c_coef * radius ** 2} > 1/2")
    return ParabolaOracle(d, c_coef, radius)


class CorridorOracle(Oracle):
    """X uniform on [-1, 1]^d minus the band |x_1| < gap/2.

    eta = clip(1/2 + (4 t0 / gap) x_1, 0, 1) is Lipschitz, crosses 1/2 only
    inside the band and satisfies |eta - 1/2| >= min(2 t0, 1/2) > t0 on the
    support.
    """

    def __init__(self, d: int, t0: float, gap_width: float):
        self.d, self.t0, self.gap_width = int(d), float(t0), float(gap_width)
        self.slope = 4.0 * self.t0 / self.gap_width
        self.descriptor = "corridor"
        vol = (2.0 - self.gap_width) * 2.0 ** (self.d - 1)
        self.margin = MarginParams(math.inf, 1.0)
        self.holder = HolderParams(1.0, self.slope)
        self.density = DensityParams(2.0 ** -self.d, min(1.0 - self.gap_width / 2.0, 2.0), 1.0 / vol, 1.0 / vol,
                                     f"[-1,1]^{self.d} minus |x1| < {self.gap_width / 2!r}")

    def sample_x(self, rng, n):
        x = rng.uniform(-1.0, 1.0, size=(n, self.d))
        half = self.gap_width / 2.0
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        x[:, 0] = sign * rng.uniform(half, 1.0, size=n)
        return x

    def eta(self, x):
        x = as_points(x)
        return np.clip(0.5 + self.slope * x[:, 0], 0.0, 1.0)

    def params(self):
        return {"generator": "corridor", "d": self.d, "t0": self.t0, "gap_width": self.gap_width}


def make_corridor(d: int, t0: float, gap_width: float) -> CorridorOracle:
    if d < 1 or not 0 < t0 < 0.5 or not gap_width > 0:
        raise ConstraintViolation("need d >= 1, 0 < t0 < 1/2, gap_width > 0")
    if gap_width >= 2:
        raise DegenerateSupport(f"a band of width {gap_width!r} covers [-1, 1]")
    return CorridorOracle(d, t0, gap_width)


# ----------------------------------------------------------------------------
# hypercube family


@dataclass(frozen=True)
class HypercubeParams:
    """One vertex of the hypercube of laws.

    ``mode`` is ``"strong"`` (A0 = unit cube minus the m bump cells) or
    ``"mild"`` (A0 = a cell-sized ball away from the bump cells). ``c_phi``
    defaults to the calibrated value for (beta, lip, d). ``alpha`` is the
    margin exponent recorded for the law.
    """

    d: int
    q: int
    m: int
    w: float
    beta: float
    lip: float
    sigma: tuple = ()
    mode: str = "strong"
    c_phi: float | None = None
    alpha: float = 0.0

    def __post_init__(self):
        if self.d < 1 or self.q < 1:
            raise ConstraintViolation("need d >= 1 and q >= 1")
        if not 1 <= self.m <= self.q ** self.d:
            raise ConstraintViolation(f"need 1 <= m <= q^d = {self.q ** self.d}, got m = {self.m}")
        if not 0 < self.w <= 1.0 / self.m * (1 + 1e-12):
            raise ConstraintViolation(f"need 0 < w <= 1/m = {1.0 / self.m!r}, got w = {self.w!r}")
        if self.mode not in ("strong", "mild"):
            raise ConstraintViolation(f"unknown mode {self.mode!r}")
        if not (self.beta > 0 and self.lip > 0) or self.alpha < 0:
            raise ConstraintViolation("need beta > 0, L > 0, alpha >= 0")
        sigma = tuple(int(s) for s in self.sigma) if self.sigma else (1,) * self.m
        if len(sigma) != self.m or any(s not in (-1, 1) for s in sigma):
            raise ConstraintViolation(f"sigma must be {self.m} entries in {{-1, +1}}")
        object.__setattr__(self, "sigma", sigma)
        c_phi = self.c_phi if self.c_phi is not None else calibrate_c_phi(float(self.beta), float(self.lip), self.d)
        if not 0 < c_phi <= 1:
            raise ConstraintViolation("need 0 < C_phi <= 1")
        object.__setattr__(self, "c_phi", float(c_phi))

    @property
    def b(self) -> float:
        """C_phi q^-beta: the bump height, and twice the margin jump location."""
        return self.c_phi * self.q ** -self.beta

    def with_sigma(self, sigma) -> "HypercubeParams":
        return replace(self, sigma=tuple(sigma))


def hypercube_eta(x, p: HypercubeParams) -> np.ndarray:
    """(1 + sigma_j q^-beta phi(q (x - n_q(x)))) / 2 on bump cell j, exactly 1/2 elsewhere."""
    x = as_points(x)
    idx = cell_index(x, p.q)
    inside_cube = np.all((x >= 0.0) & (x <= 1.0), axis=1)
    active = inside_cube & (idx < p.m)
    local = p.q * (x - nearest_grid(x, p.q))
    bump = p.c_phi * bump_u(np.sqrt(np.einsum("ij,ij->i", local, local)))
    sigma = np.asarray(p.sigma, dtype=float)[np.where(active, idx, 0)]
    eta = 0.5 + 0.5 * sigma * p.q ** -p.beta * bump
    return np.where(active, eta, 0.5)


def hypercube_remainder(x, x2, p: HypercubeParams) -> np.ndarray:
    """eta(x2) minus the Taylor polynomial of eta at x, evaluated at x2."""
    x = as_points(x)
    x2 = as_points(x2)
    idx = cell_index(x, p.q)
    inside_cube = np.all((x >= 0.0) & (x <= 1.0), axis=1)
    active = inside_cube & (idx < p.m)
    z = nearest_grid(x, p.q)
    order = degree_for(p.beta)
    step = x2 - x
    r = np.sqrt(np.einsum("ij,ij->i", step, step))
    e = step / np.where(r > 0, r, 1.0)[:, None]
    # d/ds u(||q(x - z) + q s e||): series in (q s)
    series = radial_series(p.q * (x - z), e, order)
    taylor_bump = ser.evaluate(series, p.q * r)
    sigma = np.asarray(p.sigma, dtype=float)[np.where(active, idx, 0)]
    taylor = np.where(active, 0.5 + 0.5 * sigma * p.q ** -p.beta * p.c_phi * taylor_bump, 0.5)
    return hypercube_eta(x2, p) - taylor


class HypercubeOracle(Oracle):
    def __init__(self, p: HypercubeParams):
        self.p = p
        self.d = p.d
        self.descriptor = "hypercube"
        q, d, m, w = p.q, p.d, p.m, p.w
        self.centers = grid_points(q, d)
        self.ball_radius = 1.0 / (4.0 * q)
        self.rest_mass = max(0.0, 1.0 - m * w)
        if p.mode == "strong":
            self.a0_cells = np.arange(m, q ** d)
            a0_volume = self.a0_cells.size / q ** d
            if self.rest_mass > 1e-12 and self.a0_cells.size == 0:
                raise DegenerateSupport("strong mode with m = q^d leaves no room for A0 but m w < 1")
        else:
            radius = 1.0 / (2.0 * q)
            if radius < 1e-6:
                raise DegenerateSupport(f"A0 ball radius {radius} is below 1e-6")
            if m < q ** d:
                center = self.centers[m]
            else:
                center = np.full(d, 1.0 / (2.0 * q))
                center[0] = 1.0 + 1.0 / (2.0 * q)
            self.a0_center, self.a0_radius = center, radius
            a0_volume = unit_ball_volume(d) * radius ** d
        ball_density = w / (unit_ball_volume(d) * self.ball_radius ** d)
        levels = [ball_density]
        if self.rest_mass > 1e-12:
            levels.append(self.rest_mass / a0_volume)
        mu_min = min(levels) if p.mode == "strong" else 0.0
        self.density = DensityParams(2.0 ** -d, self.ball_radius, mu_min, max(levels),
                                     f"hypercube {p.mode}: {m} balls of radius 1/(4q) plus A0")
        jump = p.b / 2.0
        self.margin = MarginParams(p.alpha, m * w / jump ** p.alpha)
        self.holder = HolderParams(p.beta, p.lip)

    def sample_x(self, rng, n):
        p = self.p
        out = np.empty((n, p.d))
        in_ball = rng.random(n) < p.m * p.w
        k = int(in_ball.sum())
        cells = rng.integers(0, p.m, size=k)
        out[in_ball] = self.centers[cells] + _uniform_ball(rng, k, p.d, self.ball_radius)
        rest = n - k
        if rest:
            if p.mode == "strong":
                cells = self.a0_cells[rng.integers(0, self.a0_cells.size, size=rest)]
                lower = self.centers[cells] - 1.0 / (2.0 * p.q)
                out[~in_ball] = lower + rng.random((rest, p.d)) / p.q
            else:
                out[~in_ball] = self.a0_center + _uniform_ball(rng, rest, p.d, self.a0_radius)
        return out

    def eta(self, x):
        return hypercube_eta(x, self.p)

    def params(self):
        p = self.p
        return {"generator": "hypercube", "d": p.d, "q": p.q, "m": p.m, "w": p.w, "beta": p.beta,
                "lip": p.lip, "c_phi": p.c_phi, "mode": p.mode, "alpha": p.alpha,
                "sigma": ",".join(str(s) for s in p.sigma)}


def sample_hypercube(p: HypercubeParams, seed, n: int) -> Dataset:
    return HypercubeOracle(p).sample(seed, n)


def assouad_bound(p: HypercubeParams, n: int, form: str = "scaled") -> float:
    """Minimax lower bound over the hypercube for sample size ``n``.

    ``form="scaled"`` returns m w b (1 - b sqrt(n w)) / 2, the version in
    which every cell carries its X-mass w. ``form="printed"`` omits the
    factor w, i.e. m b (1 - b sqrt(n w)) / 2. Both use b = b' = C_phi q^-beta
    and are floored at 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    b = p.b
    core = p.m * b * (1.0 - b * math.sqrt(n * p.w)) / 2.0
    if form == "scaled":
        core *= p.w
    elif form != "printed":
        raise ValueError(f"unknown form {form!r}")
    return max(core, 0.0)


def _floor(v: float) -> int:
    # 1000 ** (1/3) evaluates to 9.999999999999998
    return math.floor(v * (1.0 + 1e-12))


def strong_family_params(n: int, beta: float, lip: float, d: int, alpha: float,
                         c_q: float = 1.0, c_w: float = 1.0, c_m: float = 1.0) -> dict:
    """Grid size, cell mass and cell count for the strong-density lower bound at size n.

    q = floor(c_q n^(1/(2 beta + d))), w = c_w q^-d, m = floor(c_m q^(d - alpha beta)),
    with m clipped to [1, q^d].
    """
    q = max(1, _floor(c_q * n ** (1.0 / (2.0 * beta + d))))
    w = c_w * q ** -d
    m = min(q ** d, max(1, _floor(c_m * q ** (d - alpha * beta))))
    return {"d": d, "q": q, "m": m, "w": w, "beta": beta, "lip": lip, "mode": "strong", "alpha": alpha}


def mild_family_params(n: int, beta: float, lip: float, d: int, alpha: float,
                       c_q: float = 1.0, c_w: float = 1.0) -> dict:
    """q = floor(c_q n^(1/((2+alpha) beta + d))), w = c_w q^(2 beta)/n, m = q^d."""
    q = max(1, _floor(c_q * n ** (1.0 / ((2.0 + alpha) * beta + d))))
    w = c_w * q ** (2.0 * beta) / n
    return {"d": d, "q": q, "m": q ** d, "w": w, "beta": beta, "lip": lip, "mode": "mild", "alpha": alpha}


@dataclass(frozen=True)
class HypercubeFamily:
    """Sample-size dependent hypercube laws with a random sign vector per draw.

    ``oracle_for(n, seed)`` returns the law used at sample size n; the sign
    vector is drawn from ``seed``.
    """

    beta: float
    lip: float
    d: int = 1
    alpha: float = 0.0
    mode: str = "strong"
    c_q: float = 1.0
    c_w: float = 1.0
    c_m: float = 1.0

    def params_for(self, n: int) -> dict:
        if self.mode == "strong":
            return strong_family_params(n, self.beta, self.lip, self.d, self.alpha, self.c_q, self.c_w, self.c_m)
        return mild_family_params(n, self.beta, self.lip, self.d, self.alpha, self.c_q, self.c_w)

    def oracle_for(self, n: int, seed) -> HypercubeOracle:
        kw = self.params_for(n)
        rng = np.random.default_rng(seed)
        sigma = tuple(int(s) for s in np.where(rng.random(kw["m"]) < 0.5, -1, 1))
        return HypercubeOracle(HypercubeParams(sigma=sigma, **kw))
