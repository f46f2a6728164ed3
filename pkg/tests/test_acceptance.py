"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL | detail`` line (collected
again in the terminal summary) and then asserts the same verdict, so a
failing criterion shows up both in the summary and as a failed test.
"""

import math
import time

import numpy as np
import pytest

from ambiport.ambiguity import objective
from ambiport.envelope import brute_force_demand, optimal_demand, solve_concavification_point, utility
from ambiport.experiments import (
    factorial_effects,
    factorial_runs,
    solve_problem,
    table_aaa,
    table_raa,
    terminal_curves,
)
from ambiport.model import AmbiguitySpec, Contract, DiscretePrior
from ambiport.montecarlo import budget_identity, filter_consistency, simulate
from ambiport.solver import grad_wealth_surface, optimal_fraction, solve_policy, wealth_surface

from conftest import record

Q_TOL = 0.015
EFFECT_TOL = 0.02
RUNTIME_LIMIT = 600.0

RAA_TARGET = (0.733, 0.573, 0.413, 0.238, 0.168, 0.127, 0.102, 0.091, 0.087, 0.086)
AAA_TARGET = (0.799, 0.791, 0.751, 0.694, 0.563, 0.423, 0.294, 0.108, 0.094, 0.090)
FACTORIAL_TARGET = (0.392, 0.663, 0.413, 0.733, 0.079, 0.103, 0.104, 0.127)
EFFECT_TARGET = {"A": 0.160, "B": 0.035, "C": -0.447}
MERTON_FRACTION = (0.078 - 0.02) / (0.3 ** 2 * 0.5)
MC_PATHS = 100_000


def _fmt(xs):
    return "[" + ", ".join(f"{x:.3f}" for x in xs) + "]"


def _worst_dev(got, want):
    dev = np.abs(np.asarray(got) - np.asarray(want))
    return float(dev.max()), int(np.sum(dev <= Q_TOL))


@pytest.mark.slow
def test_criterion_1_raa_table():
    start = time.perf_counter()
    rows = table_raa()
    elapsed = time.perf_counter() - start
    q = [r["q_star"] for r in rows]
    worst, hits = _worst_dev(q, RAA_TARGET)
    ok = worst <= Q_TOL and elapsed < RUNTIME_LIMIT
    record(1, ok, f"q*={_fmt(q)} target={_fmt(RAA_TARGET)} within {hits}/10, "
                  f"max dev {worst:.3f}, runtime {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_1_local_optimality_spot_check(problem):
    spec = AmbiguitySpec.power(0.99)
    obj = {q: objective(problem.prior.with_probs((1 - q, q)), spec, problem).objective
           for q in (0.5, 0.733, 0.8)}
    ok = obj[0.733] <= obj[0.5] and obj[0.733] <= obj[0.8]
    record("1.1", ok, "objective at q=0.5/0.733/0.8: "
                      + ", ".join(f"{obj[q]:.6f}" for q in (0.5, 0.733, 0.8)))
    assert ok


@pytest.mark.slow
def test_criterion_2_aaa_table():
    rows = table_aaa()
    q = [r["q_star"] for r in rows]
    worst, hits = _worst_dev(q, AAA_TARGET)
    monotone = all(b <= a for a, b in zip(q, q[1:]))
    ok = worst <= Q_TOL and monotone
    record(2, ok, f"q*={_fmt(q)} target={_fmt(AAA_TARGET)} within {hits}/10, "
                  f"max dev {worst:.3f}, non-increasing={monotone}")
    assert ok


@pytest.mark.slow
def test_criterion_3_factorial():
    runs = factorial_runs()
    q = [r["q_star"] for r in runs]
    eff = factorial_effects(runs)
    worst, hits = _worst_dev(q, FACTORIAL_TARGET)
    main_ok = all(abs(eff[k] - v) <= EFFECT_TOL for k, v in EFFECT_TARGET.items())
    ok = worst <= Q_TOL and main_ok
    inter = ", ".join(f"{k}={v:+.3f}" for k, v in eff.items() if len(k) > 1)
    record(3, ok, f"q*={_fmt(q)} target={_fmt(FACTORIAL_TARGET)} within {hits}/8; "
                  f"effects A={eff['A']:+.3f} B={eff['B']:+.3f} C={eff['C']:+.3f} "
                  f"(target +0.160/+0.035/-0.447); interactions reported only: {inter}")
    assert ok


def test_criterion_4_merton(merton_policy):
    T = merton_policy.market.horizon
    y = np.linspace(-6, 8, 29)
    worst = 0.0
    for t in np.linspace(0, T - 0.01, 11):
        f = np.asarray(optimal_fraction(t, y, merton_policy))
        worst = max(worst, float(np.max(np.abs(f / MERTON_FRACTION - 1))))
    ok = worst <= 1e-5
    record(4, ok, f"fraction {MERTON_FRACTION:.6f}, max relative deviation {worst:.2e} "
                  f"over 11 times x 29 states")
    assert ok


@pytest.fixture(scope="module")
def robust_solution(problem):
    return solve_problem(problem.replace(ambiguity=AmbiguitySpec.from_raa(0.01)))


@pytest.mark.slow
def test_criterion_5_budget(problem, policy, merton_policy, robust_solution):
    pols = [policy, merton_policy, robust_solution.policy]
    for g in (0.3, 0.7):
        pols.append(solve_policy(problem.replace(risk=problem.risk.from_rra(g))))
    for q in (0.05, 0.5, 0.95):
        pols.append(solve_policy(problem, problem.prior.with_probs((1 - q, q))))
    pols.append(solve_policy(problem.replace(prior=DiscretePrior((-0.2, 0.3), (0.5, 0.5)))))
    worst = max(abs(p.budget_residual) / p.initial_wealth for p in pols)
    b = simulate(robust_solution.policy, MC_PATHS, n_steps=500, seed=1, wealth=False,
                 record_every=500)
    mc = budget_identity(b, robust_solution.policy)
    ok = worst <= 1e-8 and mc["passed"]
    record(5, ok, f"max |chi-w|/w {worst:.1e} over {len(pols)} solves; MC mean "
                  f"{mc['mean']:.4f} +- {mc['se']:.4f} vs {mc['target']}, z={mc['z_score']:+.2f}")
    assert ok


def test_criterion_6_envelope():
    env = solve_concavification_point(Contract(), 0.5)
    rng = np.random.default_rng(2024)
    grid_max, grid_n = 400.0, 400_001
    step = grid_max / (grid_n - 1)
    ys = np.exp(rng.uniform(np.log(5e-2), np.log(3 * env.y_hat), 200))
    dev = [abs(optimal_demand(y, env) - brute_force_demand(y, env, grid_max, grid_n)) for y in ys]
    y = rng.uniform(1e-3, 3 * env.y_hat, 1000)
    x = rng.uniform(0, 300, 1000)
    d = optimal_demand(y, env)
    g = env.contract.payoff
    lhs = utility(g(d), 0.5) - y * d
    rhs = utility(g(x), 0.5) - y * x
    dom = int(np.sum(lhs >= rhs - 1e-12 * np.abs(lhs)))
    ok = max(dev) <= step and dom == 1000
    record(6, ok, f"max |demand - brute force| {max(dev):.2e} (grid step {step:.0e}); "
                  f"dominance holds on {dom}/1000 pairs")
    assert ok


def test_criterion_7_gradient(policy):
    rng = np.random.default_rng(77)
    T = policy.market.horizon
    cut = policy.cuts[0]
    pts = [(rng.uniform(0.01, T), rng.uniform(-6, 8)) for _ in range(40)]
    for _ in range(10):
        s = float(np.exp(rng.uniform(np.log(0.01), np.log(T))))
        pts.append((s, cut + rng.uniform(-1, 1) * 1e-4 * math.sqrt(s)))
    worst = 0.0
    straddle = 0
    fails = 0
    for s, y in pts:
        h = 1e-4 * math.sqrt(s)
        straddle += (y - h) < cut < (y + h)
        fd = (wealth_surface(s, y + h, policy) - wealth_surface(s, y - h, policy)) / (2 * h)
        g = grad_wealth_surface(s, y, policy)
        tol = max(1e-4, 1e-4 * abs(g))
        worst = max(worst, abs(g - fd) / tol)
        fails += abs(g - fd) > tol
    ok = fails == 0
    record(7, ok, f"{len(pts) - fails}/{len(pts)} points within tolerance, "
                  f"{straddle} stencils straddle the breakpoint, worst error/tol {worst:.2e}")
    assert ok


def _drops(curve):
    v = curve.values
    return int(np.sum((v[:-1] > 0) & (v[1:] == 0)))


def _below(lo_curve, hi_curve):
    """Higher-aversion curve ``hi_curve`` at or below ``lo_curve`` where both are positive."""
    mask = (lo_curve.values > 0) & (hi_curve.values > 0)
    return bool(np.all(hi_curve.values[mask] <= lo_curve.values[mask] * (1 + 1e-12)))


@pytest.mark.slow
def test_criterion_8_curves(problem):
    pm = problem.replace(prior=DiscretePrior.point_mass(0.078))
    rra = terminal_curves(pm, "rra", (0.3, 0.5, 0.7))
    raa = terminal_curves(problem, "raa", (0.01, 0.3, 2.2))
    aaa = terminal_curves(problem, "aaa", (0.01, 1.0, 15.0))
    drops = [_drops(c) for c in rra + raa + aaa]
    cut = {name: [c.cutoff for c in cs] for name, cs in (("rra", rra), ("raa", raa), ("aaa", aaa))}
    rra_up = all(a < b for a, b in zip(cut["rra"], cut["rra"][1:]))
    raa_down = all(a > b for a, b in zip(cut["raa"], cut["raa"][1:]))
    aaa_down = all(a > b for a, b in zip(cut["aaa"], cut["aaa"][1:]))
    below = all(_below(a, b) for cs in (raa, aaa) for a, b in zip(cs, cs[1:]))
    ok = all(d == 1 for d in drops) and rra_up and raa_down and aaa_down and below
    record(8, ok, f"drops per curve {drops}; cutoffs rra {_fmt(cut['rra'])} rising={rra_up}, "
                  f"raa {_fmt(cut['raa'])} falling={raa_down}, aaa {_fmt(cut['aaa'])} "
                  f"falling={aaa_down}; higher aversion pointwise below={below}")
    assert ok


@pytest.mark.slow
def test_criterion_9_filter(policy):
    b = simulate(policy, MC_PATHS, n_steps=500, seed=9, wealth=False, record_every=500)
    rep = filter_consistency(b, policy)
    ok = rep["passed"]
    record(9, ok, f"slope {rep['slope']:.4f} +- {rep['se']:.4f} (pass={rep['slope_passed']}); "
                  f"posterior mass > {rep['level']} on drawn atom in "
                  f"{100 * rep['frac_mass_above_level']:.1f}% of paths (need > 90%); "
                  f"filter within half-gap of truth in {100 * rep['frac_within_half_gap']:.1f}%")
    assert ok
