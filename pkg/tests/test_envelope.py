import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambiport.envelope import (
    brute_force_demand,
    concavification_gap,
    interior_branch,
    inverse_marginal,
    optimal_demand,
    solve_concavification_point,
    utility,
)
from ambiport.model import Contract

C0 = Contract()


@pytest.fixture(scope="module")
def env():
    return solve_concavification_point(C0, 0.5)


def test_inverse_marginal_values():
    assert inverse_marginal(1.0, 0.3) == 1.0
    assert inverse_marginal(4.0, 0.5) == pytest.approx(0.0625)
    assert inverse_marginal(0.04, 0.5) == pytest.approx(625.0)
    with pytest.raises(ValueError):
        inverse_marginal(0.0, 0.5)


def test_interior_branch_values(env):
    assert interior_branch(0.2, env) == pytest.approx(5.9, rel=1e-14)
    assert interior_branch(0.05, env) == pytest.approx(80.9, rel=1e-14)
    ub = 0.2 * 0.02 ** -0.5
    assert env.upper == pytest.approx(ub)
    assert interior_branch(ub * (1 - 1e-12), env) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        interior_branch(ub, env)
    y = np.linspace(0.01, 0.99 * ub, 50)
    h = interior_branch(y, env)
    assert np.all(h > 1.0)
    assert np.allclose(0.2 * (h - 1.0) + 0.02, inverse_marginal(y / 0.2, 0.5), rtol=1e-13)


def test_switching_point(env):
    assert 0 < env.y_hat < 10
    assert abs(concavification_gap(env.y_hat, C0, 0.5)) <= 1e-10
    # independent dense scan for the sign change
    y = np.linspace(1e-4, 0.2 * 0.02 ** -0.5, 200001)
    g = concavification_gap(y, C0, 0.5)
    k = np.nonzero(np.diff(np.sign(g)))[0]
    assert len(k) == 1
    assert y[k[0]] <= env.y_hat <= y[k[0] + 1]


def test_gap_negative_at_upper_end():
    ub = 0.2 * 0.02 ** -0.5
    assert concavification_gap(ub, C0, 0.5) < 0


def test_linear_has_no_switch():
    e = solve_concavification_point(Contract.linear_payoff(), 0.5)
    assert e.y_hat == math.inf
    assert optimal_demand(4.0, e) == pytest.approx(0.0625)


def test_demand_branches(env):
    assert optimal_demand(env.y_hat, env) == 0.0
    assert optimal_demand(2 * env.y_hat, env) == 0.0
    assert optimal_demand(env.y_hat / 2, env) == pytest.approx(interior_branch(env.y_hat / 2, env))


def test_all_or_nothing(env):
    y = np.linspace(1e-3, 3 * env.y_hat, 2000)
    d = optimal_demand(y, env)
    assert np.all(d[y < env.y_hat] > 1.0)
    assert np.all(d[y >= env.y_hat] == 0.0)
    assert np.all(np.diff(d) <= 0)


def test_gap_strictly_decreasing():
    rng = np.random.default_rng(3)
    ub = 0.2 * 0.02 ** -0.5
    a = rng.uniform(1e-6, ub, 1000)
    b = rng.uniform(1e-6, ub, 1000)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keep = hi > lo
    assert np.all(concavification_gap(lo[keep], C0, 0.5) > concavification_gap(hi[keep], C0, 0.5))


def test_brute_force_large_and_small(env):
    assert brute_force_demand(50.0, env, 100.0, 10001) == 0.0
    assert brute_force_demand(1e-6, env, 100.0, 10001) == 100.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 1.0), st.floats(0.1, 5), st.floats(1e-3, 0.5))
def test_switch_solves_for_many_contracts(alpha, delta, K, C):
    c = Contract(delta, K, C)
    e = solve_concavification_point(c, alpha)
    assert 0 < e.y_hat < e.upper
    assert abs(concavification_gap(e.y_hat, c, alpha)) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, -0.05), st.floats(0.05, 1.0), st.floats(0.1, 5), st.floats(0.01, 0.5))
def test_switch_for_negative_alpha(alpha, delta, K, C):
    c = Contract(delta, K, C)
    e = solve_concavification_point(c, alpha)
    assert 0 < e.y_hat < e.upper


def test_zero_strike_has_no_jump():
    c = Contract(0.2, 0.0, 0.02)
    e = solve_concavification_point(c, 0.5)
    assert e.y_hat == pytest.approx(e.upper)
    assert e.jump == 0.0


def test_gap_matches_direct_formula():
    y = np.linspace(0.01, 1.4, 40)
    h = (inverse_marginal(y / 0.2, 0.5) - 0.02) / 0.2 + 1.0
    direct = utility(C0.payoff(h), 0.5) - utility(0.02, 0.5) - y * h
    assert np.allclose(concavification_gap(y, C0, 0.5), direct, rtol=1e-12, atol=1e-12)


def test_gap_at_upper_end_is_minus_strike_cost():
    ub = 0.2 * 0.02 ** -0.5
    assert concavification_gap(ub, C0, 0.5) == pytest.approx(-ub * 1.0, rel=1e-12)


def test_envelope_dominance(env):
    rng = np.random.default_rng(11)
    y = rng.uniform(1e-3, 2 * env.y_hat, 1000)
    x = rng.uniform(0, 200, 1000)
    d = optimal_demand(y, env)
    best = utility(C0.payoff(d), 0.5) - y * d
    other = utility(C0.payoff(x), 0.5) - y * x
    assert np.all(best >= other - 1e-12 * np.abs(best))
