import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plugin_rates.dataset import Dataset
from plugin_rates.errors import NetBudgetExceeded
from plugin_rates.sieve import (NetSpec, SieveConfig, brute_force_select, build_net, empirical_risk, epsilon_exponent,
                                epsilon_schedule, implied_a_prime, recorded_a_prime, select_sieve, sized_spec)


def constants_net(tau=0.25, **kw):
    return build_net(NetSpec(beta=1.0, lip=1.0, tau=tau, **kw))


def test_constant_net_counts():
    assert constants_net().count == 5
    assert constants_net(cells_per_axis=2).count == 25
    assert constants_net(tau=0.125).count == 9
    lin = build_net(NetSpec(beta=2.0, lip=1.0, tau=0.5))
    assert lin.per_cell == 3 * 5 and lin.basis == ((0,), (1,))


def test_singleton_net():
    net = build_net(NetSpec(beta=1.0, lip=1.0, tau=2.0))
    assert net.count == 1
    data = Dataset([[0.1], [0.9]], [0, 1])
    assert select_sieve(data, net).index == 0


def test_all_ones_picks_half():
    net = constants_net()
    data = Dataset(np.linspace(0, 1, 10)[:, None], np.ones(10))
    fit = select_sieve(data, net)
    assert fit.index == 2 and fit.member.coefs[0, 0] == 0.5 and fit.errors == 0


def test_true_eta_in_net_gives_zero_risk():
    net = build_net(NetSpec(beta=1.0, lip=1.0, cells_per_axis=4, tau=0.25))
    truth = net.member(net.index_of([0, 1, 4, 3]))
    rng = np.random.default_rng(0)
    x = rng.random((100, 1))
    data = Dataset(x, truth.rule()(x))
    fit = select_sieve(data, net)
    assert fit.errors == 0 and fit.empirical_risk == 0.0
    assert brute_force_select(data, net).index == fit.index


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([0.25, 0.5]), st.integers(1, 2),
       st.integers(1, 40))
def test_select_matches_brute_force(seed, k, tau, degree_plus_one, n):
    spec = NetSpec(beta=float(degree_plus_one), lip=1.0, cells_per_axis=k, tau=tau, lower=-1.0, upper=1.0)
    net = Net_or_skip(spec)
    rng = np.random.default_rng(seed)
    data = Dataset(rng.uniform(-1.2, 1.2, (n, 1)), rng.integers(0, 2, n))
    fast, slow = select_sieve(data, net), brute_force_select(data, net)
    assert fast.index == slow.index and fast.errors == slow.errors
    assert fast.empirical_risk == empirical_risk(fast.member.rule(), data)


def Net_or_skip(spec):
    try:
        return build_net(NetSpec(**{**spec.__dict__, "size_budget": 10 ** 4}))
    except NetBudgetExceeded:
        from hypothesis import reject
        reject()


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.data())
def test_index_round_trip(k, d, data):
    net = build_net(NetSpec(beta=1.0, lip=1.0, d=d, cells_per_axis=k, tau=0.5, size_budget=10 ** 30))
    idx = data.draw(st.integers(0, net.count - 1))
    digits = net.digits(idx)
    assert len(digits) == net.n_cells and net.index_of(digits) == idx
    assert net.member(idx).index == idx


def test_enumeration_order_and_values():
    net = build_net(NetSpec(beta=1.0, lip=1.0, cells_per_axis=2, tau=0.5))
    members = list(net)
    assert [m.index for m in members] == list(range(9))
    assert members[5].coefs[:, 0].tolist() == [0.5, 1.0]
    x = np.array([[0.25], [0.75], [-3.0], [7.0]])
    assert members[5](x).tolist() == [0.5, 1.0, 0.5, 1.0]


def test_member_values_are_clipped():
    net = build_net(NetSpec(beta=2.0, lip=1.0, tau=0.5))
    m = net.member(net.index_of([net.per_cell - 1]))  # constant 1, slope 1
    v = m(np.linspace(0, 1, 11)[:, None])
    assert v.max() == 1.0 and v.min() >= 0.0


def test_budget_enforced_before_enumeration():
    spec = NetSpec(beta=1.0, lip=1.0, cells_per_axis=2 ** 20, tau=0.25)
    with pytest.raises(NetBudgetExceeded) as err:
        build_net(spec)
    assert "about 10^" in str(err.value)


def test_epsilon_exponents_exact():
    assert epsilon_exponent(0, 2) == Fraction(1, 4)
    assert epsilon_exponent(1, 0) == Fraction(1, 3)
    assert epsilon_exponent(Fraction(1, 2), 1, 2) == Fraction(5, 2) / (Fraction(5, 2) * 2 + Fraction(5, 2))
    assert epsilon_schedule(16, SieveConfig(0, 2)) == pytest.approx(0.5)
    assert epsilon_schedule(16, SieveConfig(0, 2, c_eps=3)) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        epsilon_schedule(0, SieveConfig(0, 2))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5), st.floats(0.01, 5), st.floats(1, 50))
def test_finite_p_tends_to_sup_norm(alpha, rho, p):
    e_p = float(epsilon_exponent(alpha, rho, p))
    e_inf = float(epsilon_exponent(alpha, rho))
    assert 0 < e_p and 0 < e_inf <= 1 / 2
    assert float(epsilon_exponent(alpha, rho, 1e12)) == pytest.approx(e_inf, rel=1e-9)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
@pytest.mark.parametrize("lip", [0.5, 1.0, 3.0])
def test_entropy_bound_degree_zero(eps, lip):
    net = build_net(sized_spec(1.0, lip, eps, size_budget=10 ** 400))
    a_prime = recorded_a_prime(lip)
    assert net.log_count <= a_prime / eps
    assert implied_a_prime(net, 1.0) <= a_prime


def _lipschitz_fn(rng, lip):
    knots = np.linspace(0, 1, 33)
    slopes = rng.uniform(-lip, lip, 32)
    vals = rng.uniform(0, 1) + np.concatenate([[0], np.cumsum(slopes * np.diff(knots))])
    return lambda x: np.clip(np.interp(x, knots, vals), 0, 1)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_sized_net_covers_lipschitz_functions(eps):
    lip = 2.0
    rng = np.random.default_rng(int(eps * 1000))
    net = build_net(sized_spec(1.0, lip, eps, size_budget=10 ** 400))
    width = 1.0 / net.spec.cells_per_axis
    centers = (np.arange(net.spec.cells_per_axis) + 0.5) * width
    levels = net.choices[:, 0]
    grid = np.linspace(0, 1, 20_001)
    for _ in range(50):
        f = _lipschitz_fn(rng, lip)
        digits = [int(np.argmin(np.abs(levels - f(c)))) for c in centers]
        approx = net.member(net.index_of(digits))
        assert np.max(np.abs(approx(grid[:, None]) - f(grid))) <= eps


def test_sized_net_covers_rough_holder_functions():
    beta, lip, eps = 0.5, 1.0, 0.2
    net = build_net(sized_spec(beta, lip, eps, size_budget=10 ** 400))
    k = net.spec.cells_per_axis
    centers = (np.arange(k) + 0.5) / k
    grid = np.linspace(0, 1, 20_001)
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, s, base = rng.random(), rng.choice([-1, 1]), rng.uniform(0.2, 0.8)
        f = lambda x: np.clip(base + s * 0.5 * lip * np.sqrt(np.abs(x - a)), 0, 1)  # noqa: E731
        digits = [int(np.argmin(np.abs(net.choices[:, 0] - f(c)))) for c in centers]
        approx = net.member(net.index_of(digits))
        assert np.max(np.abs(approx(grid[:, None]) - f(grid))) <= eps


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        select_sieve(Dataset(np.zeros((3, 2)), [0, 1, 0]), constants_net())
