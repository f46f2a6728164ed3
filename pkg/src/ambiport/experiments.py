"""Parameter sweeps behind the command-line tools.

Every sweep takes a base :class:`Problem` and varies one preference
parameter; levels run concurrently on a bounded thread pool.
"""

from __future__ import annotations

import configparser
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ambiguity import PolicyMemo, worst_case_prior
from .model import (
    AmbiguitySpec,
    Contract,
    DiscretePrior,
    MarketParams,
    Problem,
    RiskPrefs,
    to_config,
    validate,
)
from .montecarlo import budget_identity, filter_consistency, simulate, supermartingale_check
from .solver import (
    SolvedPolicy,
    optimal_fraction,
    solve_policy,
    terminal_wealth,
    value_function,
    wealth_surface,
)

RAA_LEVELS = (0.01, 0.02, 0.04, 0.1, 0.3, 0.7, 1.2, 1.7, 2.0, 2.2)
GAMMA_LEVELS = (0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 8.0, 12.0, 15.0)
RRA_LEVELS = (0.3, 0.5, 0.7)
FACTOR_LEVELS = {"A": (0.5, 0.8), "B": (0.3, 0.5), "C": (0.01, 0.3)}
CONFIG_ENV = "AMBIPORT_CONFIG_DIR"


def default_problem(ambiguity: AmbiguitySpec | None = None) -> Problem:
    """Baseline market, contract and two-point prior used by every sweep."""
    return Problem(
        market=MarketParams(r=0.02, sigma=0.3, horizon=10.0),
        contract=Contract(delta=0.2, strike=1.0, base=0.02),
        risk=RiskPrefs(alpha=0.5),
        ambiguity=ambiguity or AmbiguitySpec.neutral(),
        prior=DiscretePrior.two_point(0.03, 0.09, 0.8),
        initial_wealth=10.0,
    )


def resolve_config_path(path: str) -> str:
    """Return ``path`` if it exists, else look it up in ``$AMBIPORT_CONFIG_DIR``."""
    if os.path.exists(path):
        return path
    base = os.environ.get(CONFIG_ENV)
    if base:
        for cand in (os.path.join(base, path), os.path.join(base, path + ".ini")):
            if os.path.exists(cand):
                return cand
    raise FileNotFoundError(f"config file not found: {path}")


def load_problem(path: str) -> Problem:
    """Parse an INI file; sections left out take the baseline values."""
    cp = configparser.ConfigParser()
    with open(resolve_config_path(path)) as fh:
        cp.read_file(fh)
    merged = to_config(default_problem())
    for name in cp.sections():
        section = dict(cp[name])
        if name == "ambiguity":
            merged[name] = section
        else:
            merged.setdefault(name, {}).update(section)
    if "contract" in cp and _truthy(cp["contract"].get("linear", "false")):
        merged["contract"] = {"linear": "true"}
    return validate(merged)


def _truthy(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def config_text(problem: Problem) -> str:
    cp = configparser.ConfigParser()
    cp.read_dict(to_config(problem))
    lines = []
    for name in cp.sections():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in cp[name].items())
    return "\n".join(lines)


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


@dataclass(frozen=True)
class LevelSolution:
    level: float
    policy: SolvedPolicy
    q_star: float | None
    objective: float
    value: float


def solve_problem(problem: Problem, memo: PolicyMemo | None = None, jobs: int = 1,
                  level: float = math.nan) -> LevelSolution:
    """Worst-case prior (or the reference prior when neutral) and its policy."""
    if problem.ambiguity.kind == "neutral":
        pol = solve_policy(problem)
        V = value_function(pol)
        q = problem.prior.q if problem.prior.size == 2 else None
        return LevelSolution(level, pol, q, V, V)
    res = worst_case_prior(problem.ambiguity, problem, jobs=jobs, memo=memo)
    return LevelSolution(level, res.policy, res.q_star, res.objective, res.evaluation.value)


def with_level(problem: Problem, axis: str, level: float) -> Problem:
    if axis == "raa":
        return problem.replace(ambiguity=AmbiguitySpec.from_raa(level))
    if axis == "aaa":
        return problem.replace(ambiguity=AmbiguitySpec.exponential(level))
    if axis == "rra":
        return problem.replace(risk=RiskPrefs.from_rra(level))
    raise ValueError(f"unknown sweep axis {axis!r}")


def sweep(problem: Problem, axis: str, levels, jobs: int = 1) -> list[LevelSolution]:
    """Solve ``problem`` at each level of ``axis`` (``raa``, ``aaa`` or ``rra``)."""
    memo = PolicyMemo() if axis in ("raa", "aaa") else None

    def one(level):
        return solve_problem(with_level(problem, axis, level), memo=memo, level=level)

    return _pmap(one, levels, jobs)


def table_raa(problem: Problem | None = None, levels=RAA_LEVELS, jobs: int = 1) -> list[dict]:
    problem = problem or default_problem()
    out = []
    for sol in sweep(problem, "raa", levels, jobs):
        out.append({"raa": sol.level, "lambda": 1.0 - sol.level, "q_star": sol.q_star,
                    "objective": sol.objective})
    return out


def table_aaa(problem: Problem | None = None, levels=GAMMA_LEVELS, jobs: int = 1) -> list[dict]:
    problem = problem or default_problem()
    out = []
    for sol in sweep(problem, "aaa", levels, jobs):
        out.append({"gamma": sol.level, "q_star": sol.q_star, "objective": sol.objective})
    return out


def factorial_runs(problem: Problem | None = None, levels=None, jobs: int = 1) -> list[dict]:
    """Eight worst-case solves in standard order (A varies fastest).

    A is the reference weight on the larger drift, B the relative risk
    aversion and C the relative ambiguity aversion.
    """
    problem = problem or default_problem()
    levels = levels or FACTOR_LEVELS
    memos = {}
    cells = []
    for c, b, a in itertools.product((0, 1), (0, 1), (0, 1)):
        cells.append((a, b, c))
        memos.setdefault((a, b), PolicyMemo())

    def one(cell):
        a, b, c = cell
        qa, rra, raa = levels["A"][a], levels["B"][b], levels["C"][c]
        p = problem.replace(
            prior=problem.prior.with_probs((1.0 - qa, qa)),
            risk=RiskPrefs.from_rra(rra),
            ambiguity=AmbiguitySpec.from_raa(raa),
        )
        sol = solve_problem(p, memo=memos[(a, b)])
        names = ("Low", "High")
        return {"A": names[a], "B": names[b], "C": names[c], "q": qa, "rra": rra, "raa": raa,
                "q_star": sol.q_star, "objective": sol.objective}

    return _pmap(one, cells, jobs)


def factorial_effects(runs: list[dict]) -> dict[str, float]:
    """Main effects and interactions as differences of conditional means.

    Levels are coded -1/+1; an interaction's level is the product of its
    factors' codes.
    """
    code = {"Low": -1, "High": 1}
    y = np.array([r["q_star"] for r in runs], dtype=float)
    X = {f: np.array([code[r[f]] for r in runs]) for f in "ABC"}
    out = {}
    for k in (1, 2, 3):
        for combo in itertools.combinations("ABC", k):
            s = np.prod([X[f] for f in combo], axis=0)
            out["x".join(combo)] = float(y[s > 0].mean() - y[s < 0].mean())
    return out


@dataclass(frozen=True)
class Curve:
    axis: str
    level: float
    q_star: float | None
    cutoff: float
    x: np.ndarray
    values: np.ndarray


def terminal_curves(problem: Problem, axis: str, levels, xi=None, n: int = 400,
                    jobs: int = 1) -> list[Curve]:
    """Optimal terminal wealth against the state-price density for each level.

    The default grid runs from ``0.01 * c`` to ``1.5 * c`` with ``c`` the
    largest cutoff among the levels.
    """
    sols = sweep(problem, axis, levels, jobs)
    if xi is None:
        top = max(s.policy.cutoff for s in sols)
        xi = np.linspace(0.01 * top, 1.5 * top, n)
    xi = np.asarray(xi, dtype=float)
    return [Curve(axis, s.level, s.q_star, s.policy.cutoff, xi,
                  np.asarray(terminal_wealth(s.policy, xi))) for s in sols]


def fraction_curves(problem: Problem, axis: str, levels, t: float, y=None,
                    jobs: int = 1) -> list[dict]:
    """Risky fraction against current wealth at time ``t`` for each level.

    Wealth is traced by mapping an observation grid through the wealth
    surface; rows with no wealth left carry ``nan`` fractions.
    """
    sols = sweep(problem, axis, levels, jobs)
    T = problem.market.horizon
    if y is None:
        sd = math.sqrt(T - t) + math.sqrt(t)
        y = np.linspace(-2 * sd, 3 * sd, 121)
    y = np.asarray(y, dtype=float)
    rows = []
    for s in sols:
        W = np.asarray(wealth_surface(T - t, y, s.policy))
        f = np.asarray(optimal_fraction(t, y, s.policy))
        for yi, wi, fi in zip(y, W, f):
            rows.append({"axis": axis, "level": s.level, "y": yi, "wealth": wi, "fraction": fi})
    return rows


def simulation_report(problem: Problem, n_paths: int = 100_000, seed: int = 0,
                      n_steps: int = 500, wealth_paths: int = 2000, jobs: int = 1) -> dict:
    """Budget, supermartingale and filter checks for the problem's optimal policy.

    Budget and filter checks use ``n_paths`` observation paths; the wealth
    recursion runs on the first ``wealth_paths`` of them.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    sol = solve_problem(problem, memo=PolicyMemo(), jobs=jobs)
    pol = sol.policy
    obs = simulate(pol, n_paths, n_steps, seed, wealth=False, record_every=n_steps, jobs=jobs)
    nw = min(wealth_paths, n_paths)
    bundle = simulate(pol, nw, n_steps, seed, wealth=True, record_every=max(1, n_steps // 20),
                      jobs=jobs)
    checks = [
        budget_identity(obs, pol, "surface"),
        budget_identity(bundle, pol, "sde"),
        supermartingale_check(bundle, pol, source="sde"),
        filter_consistency(obs, pol),
    ]
    return {
        "q_star": sol.q_star,
        "kappa_star": pol.kappa_star,
        "n_paths": n_paths,
        "wealth_paths": nw,
        "n_steps": n_steps,
        "seed": seed,
        "clamped_paths": bundle.clamped,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
