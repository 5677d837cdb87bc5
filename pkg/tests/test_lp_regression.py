import math

import numpy as np
import pytest
from scipy.stats import qmc
from hypothesis import given, settings, strategies as st

from plugin_rates.dataset import Dataset
from plugin_rates.errors import InvalidSampleSize
from plugin_rates.lp_regression import (GAUSSIAN, KernelSpec, LPConfig, build_local_system, default_bandwidth,
                                        degree_for, eta_star, eta_star_many, lp_estimate, lp_fit_many,
                                        multi_index_basis, raw_local_system)

UNIFORM = KernelSpec("uniform", 1.0)


def test_basis_examples():
    assert multi_index_basis(0, 3) == [(0, 0, 0)]
    assert multi_index_basis(1, 2) == [(0, 0), (1, 0), (0, 1)]
    assert len(multi_index_basis(2, 2)) == 6


@pytest.mark.parametrize("l, d", [(0, 1), (3, 1), (2, 2), (3, 3), (4, 2)])
def test_basis_size_and_order(l, d):
    basis = multi_index_basis(l, d)
    assert len(basis) == math.comb(l + d, d)
    assert len(set(basis)) == len(basis)
    orders = [sum(s) for s in basis]
    assert orders == sorted(orders)
    for a, b in zip(basis, basis[1:]):
        if sum(a) == sum(b):
            assert a > b  # lexicographic within a degree, larger leading power first


@pytest.mark.parametrize("beta, l", [(0.5, 0), (1.0, 0), (1.5, 1), (2.0, 1), (2.01, 2), (3.0, 2)])
def test_degree_is_largest_integer_below_beta(beta, l):
    assert degree_for(beta) == l


@pytest.mark.parametrize("n, beta, d, c, h", [(1, 1, 1, 1, 1.0), (729, 1, 1, 1, 1 / 9), (1024, 2, 1, 2, 0.5)])
def test_default_bandwidth(n, beta, d, c, h):
    assert default_bandwidth(n, beta, d, c) == pytest.approx(h, rel=1e-12)


@pytest.mark.parametrize("kernel, d", [(GAUSSIAN, 1), (GAUSSIAN, 2), (GAUSSIAN, 3), (UNIFORM, 1), (UNIFORM, 2),
                                       (KernelSpec("uniform", 0.5), 3)])
def test_kernel_integrates_to_one(kernel, d):
    # scrambled Sobol points on a box holding all but ~1e-7 of the mass
    box = 6.0 if kernel.kind == "gaussian" else kernel.radius
    u = qmc.Sobol(d, scramble=True, seed=d).random_base2(20)
    u = (2 * u - 1) * box
    assert abs(np.mean(kernel(u)) * (2 * box) ** d - 1.0) < 1e-3


@pytest.mark.parametrize("kernel", [GAUSSIAN, UNIFORM, KernelSpec("uniform", 0.5)])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_kernel_lower_bound(kernel, d):
    c = kernel.lower_bound_constant(d)
    assert c > 0
    rng = np.random.default_rng(0)
    u = rng.standard_normal((2000, d))
    u *= (c * rng.random(2000) / np.linalg.norm(u, axis=1))[:, None]
    assert np.all(kernel(u) >= c)


def test_single_point_rank_one():
    data = Dataset([[0.3]], [1])
    fit = build_local_system(data, 0.3, LPConfig(2.0, 0.5, UNIFORM))
    # ((X - x)/h)^k vanishes for k >= 1 at X = x, so only Bbar[0,0] = K(0)/(n h)
    assert fit.bbar[0, 0] == pytest.approx(UNIFORM(np.zeros((1, 1)))[0] / 0.5)
    assert np.all(fit.bbar.ravel()[1:] == 0)
    assert fit.lambda_min == 0.0


def test_empty_support_gives_zero_matrix():
    data = Dataset([[5.0], [6.0]], [1, 0])
    fit = build_local_system(data, 0.0, LPConfig(2.0, 0.5, UNIFORM))
    assert np.all(fit.bbar == 0) and fit.lambda_min == 0.0
    assert lp_estimate(data, 0.0, LPConfig(2.0, 0.5, UNIFORM)) == 0.0


def test_degree_zero_matrix_is_kernel_mass():
    rng = np.random.default_rng(1)
    x = rng.random((30, 2))
    data = Dataset(x, rng.integers(0, 2, 30))
    h = 0.3
    fit = build_local_system(data, [0.5, 0.5], LPConfig(1.0, h))
    direct = np.sum(GAUSSIAN((x - 0.5) / h)) / (30 * h ** 2)
    assert fit.bbar.shape == (1, 1)
    assert fit.bbar[0, 0] == pytest.approx(direct, rel=1e-13)


def test_bbar_matches_direct_sum():
    rng = np.random.default_rng(2)
    x = rng.random((40, 2))
    data = Dataset(x, rng.integers(0, 2, 40))
    cfg = LPConfig(3.0, 0.4)
    q = np.array([0.3, 0.6])
    fit = build_local_system(data, q, cfg)
    u = (x - q) / 0.4
    k = GAUSSIAN(u)
    for a, s1 in enumerate(fit.basis):
        for b, s2 in enumerate(fit.basis):
            e = np.array(s1) + np.array(s2)
            direct = np.sum(np.prod(u ** e, axis=1) * k) / (40 * 0.4 ** 2)
            assert abs(fit.bbar[a, b] - direct) <= 1e-12 * max(1.0, abs(direct))


def test_constant_labels_reproduced():
    rng = np.random.default_rng(4)
    data = Dataset(rng.random((60, 1)), np.ones(60))
    assert lp_estimate(data, 0.5, LPConfig(2.0, 0.3)) == pytest.approx(1.0, abs=1e-10)


def test_linear_target_d1():
    # labels are 0/1, so check polynomial reproduction through the solver directly
    rng = np.random.default_rng(5)
    x = rng.random(50)
    cfg = LPConfig(2.0, 0.3)
    q, v, _ = raw_local_system(Dataset(x, np.zeros(50)), 0.4, cfg)
    kern = GAUSSIAN(((x - 0.4) / 0.3)[:, None])
    v = np.array([np.sum((2 * x + 1) * kern), np.sum((x - 0.4) * (2 * x + 1) * kern)])
    assert np.linalg.solve(q, v)[0] == pytest.approx(2 * 0.4 + 1, abs=1e-8)


def test_identical_points_give_zero():
    data = Dataset(np.full((10, 1), 0.5), np.ones(10))
    assert lp_estimate(data, 0.5, LPConfig(2.0, 0.3)) == 0.0


def test_eta_star_guard_and_clip():
    data = Dataset(np.full((10, 1), 0.5), np.ones(10))
    assert eta_star(data, 0.5, LPConfig(2.0, 0.3)) == 0.0
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, 400)
    data = Dataset(x, (x > 0).astype(int))
    vals, guarded = eta_star_many(data, np.linspace(-3, 3, 61), LPConfig(2.0, 0.2))
    assert np.all((vals >= 0) & (vals <= 1))
    assert guarded[0] and guarded[-1] and vals[0] == 0.0
    raw, _ = lp_fit_many(data, np.linspace(-1, 1, 41), LPConfig(2.0, 0.2))
    assert raw.max() > 1.0  # a linear fit overshoots near the jump, so clipping is exercised
    assert eta_star_many(data, np.linspace(-1, 1, 41), LPConfig(2.0, 0.2))[0].max() <= 1.0


def test_eta_star_needs_three_points():
    with pytest.raises(InvalidSampleSize):
        eta_star(Dataset([[0.0], [1.0]], [0, 1]), 0.5, LPConfig(1.0, 1.0))
    assert eta_star(Dataset([[0.0], [1.0]], [0, 1]), 0.5, LPConfig(1.0, 1.0, sample_size_hint=100)) >= 0


def _fit_poly_values(x, y_values, query, cfg):
    """LP fit on real-valued responses through the public rescaled system."""
    from plugin_rates.lp_regression import local_systems
    from plugin_rates import numkit
    data = Dataset(x, np.zeros(len(x)))
    bbar, _ = local_systems(data, np.atleast_2d(query), cfg)
    # rhs with real responses, built the same way as the estimator does for labels
    basis = multi_index_basis(cfg.degree, x.shape[1])
    u = (x - query) / cfg.bandwidth
    k = cfg.kernel(u)
    rhs = np.array([np.sum(np.prod(u ** np.array(s), axis=1) * k * y_values) for s in basis])
    rhs /= len(x) * cfg.bandwidth ** x.shape[1]
    return numkit.solve_sym(bbar[0], rhs)[0], numkit.min_eigenvalue(bbar[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(0, 2))
def test_polynomial_reproduction(seed, d, l):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (50, d))
    coefs = rng.standard_normal(len(multi_index_basis(l, d)))
    basis = multi_index_basis(l, d)
    poly = lambda pts: sum(c * np.prod(pts ** np.array(s), axis=-1) for c, s in zip(coefs, basis))  # noqa: E731
    q = rng.uniform(-0.5, 0.5, d)
    value, lam = _fit_poly_values(x, poly(x), q, LPConfig(l + 0.5, 0.6))
    if lam > 1e-6:
        assert value == pytest.approx(poly(q), abs=1e-7)


def _random_data(seed, d=2, n=40):
    rng = np.random.default_rng(seed)
    return Dataset(rng.random((n, d)), rng.integers(0, 2, n)), rng.random(d)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_translation_invariance(seed, shift):
    data, q = _random_data(seed)
    cfg = LPConfig(2.5, 0.5)
    moved = Dataset(data.x + shift, data.y)
    assert lp_estimate(moved, q + shift, cfg) == pytest.approx(lp_estimate(data, q, cfg), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_joint_scale_invariance(seed, c):
    data, q = _random_data(seed)
    base = lp_estimate(data, q, LPConfig(2.5, 0.5))
    scaled = lp_estimate(Dataset(data.x * c, data.y), q * c, LPConfig(2.5, 0.5 * c))
    assert scaled == pytest.approx(base, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gram_identity_and_rescaling(seed):
    data, q = _random_data(seed, d=2, n=30)
    cfg = LPConfig(3.0, 0.4)
    raw_q, raw_v, z = raw_local_system(data, q, cfg)
    assert np.all(np.abs(raw_q - z.T @ z) <= 1e-9 * np.abs(raw_q).max())
    if numkit_min(raw_q) > 1e-10 * np.abs(raw_q).max():
        t0 = np.linalg.solve(raw_q, raw_v)[0]
        assert lp_estimate(data, q, cfg) == pytest.approx(t0, abs=1e-8)


def numkit_min(a):
    from plugin_rates import numkit
    return numkit.min_eigenvalue(a)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eta_star_in_unit_interval(seed):
    data, _ = _random_data(seed, d=1, n=25)
    vals, _ = eta_star_many(data, np.linspace(-0.5, 1.5, 21), LPConfig(2.5, 0.2))
    assert np.all((vals >= 0) & (vals <= 1))
