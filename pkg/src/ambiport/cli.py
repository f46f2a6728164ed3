"""``ambiport`` command-line entry point.

Exit codes: 0 success, 1 numerical failure, 2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError
from .experiments import (
    GAMMA_LEVELS,
    RAA_LEVELS,
    RRA_LEVELS,
    config_text,
    default_problem,
    factorial_effects,
    factorial_runs,
    fraction_curves,
    load_problem,
    simulation_report,
    solve_problem,
    table_aaa,
    table_raa,
    terminal_curves,
)
from .model import AmbiguitySpec, to_config
from .montecarlo import dump_paths, simulate
from .solver import optimal_fraction

AXIS_DEFAULTS = {"raa": RAA_LEVELS, "aaa": GAMMA_LEVELS, "rra": RRA_LEVELS}


class UsageError(Exception):
    pass


def _levels(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.12g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if not math.isfinite(v) else float(v)
    return v


def render(tables, command, problem, fmt):
    """Serialise named tables (lists of row dicts) with a self-describing header."""
    if fmt == "json":
        doc = {"version": __version__, "command": command, "config": to_config(problem)}
        doc.update({name: _jsonable(rows) for name, rows in tables.items()})
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# ambiport {__version__}\n# command: {command}\n")
    for line in config_text(problem).splitlines():
        buf.write(f"# {line}\n")
    wr = csv.writer(buf, lineterminator="\n")
    for i, (name, rows) in enumerate(tables.items()):
        if i:
            buf.write("\n")
        if len(tables) > 1:
            buf.write(f"# table: {name}\n")
        if not rows:
            continue
        cols = list(rows[0])
        wr.writerow(cols)
        for row in rows:
            wr.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def _problem(args, kind=None):
    problem = load_problem(args.config) if args.config else default_problem()
    if kind is not None and problem.ambiguity.kind != kind:
        problem = problem.replace(ambiguity=AmbiguitySpec.from_raa(0.01) if kind == "power"
                                  else AmbiguitySpec.exponential(1.0))
    return problem


def cmd_solve(args):
    problem = _problem(args)
    sol = solve_problem(problem, jobs=args.jobs)
    pol = sol.policy
    row = {
        "kind": problem.ambiguity.kind,
        "q_star": sol.q_star,
        "kappa_star": pol.kappa_star,
        "y_hat": pol.envelope.y_hat,
        "cutoff": pol.cutoff,
        "value": sol.value,
        "objective": sol.objective,
        "budget_residual": pol.budget_residual,
        "fraction_t0": optimal_fraction(0.0, 0.0, pol),
    }
    return problem, {"solution": [row]}


def cmd_table_raa(args):
    problem = _problem(args, "power")
    return problem, {"table": table_raa(problem, args.levels or RAA_LEVELS, args.jobs)}


def cmd_table_aaa(args):
    problem = _problem(args, "exponential")
    return problem, {"table": table_aaa(problem, args.levels or GAMMA_LEVELS, args.jobs)}


def cmd_factorial(args):
    problem = _problem(args)
    runs = factorial_runs(problem, jobs=args.jobs)
    eff = factorial_effects(runs)
    rows = [{"effect": k, "value": v, "kind": "main" if len(k) == 1 else "interaction",
             "convention_sensitive": len(k) > 1} for k, v in eff.items()]
    return problem, {"runs": runs, "effects": rows}


def cmd_frontier(args):
    problem = _problem(args)
    levels = args.levels or AXIS_DEFAULTS[args.axis]
    xi = None
    if args.xi_max is not None:
        xi = np.linspace(args.xi_max / args.n, args.xi_max, args.n)
    curves = terminal_curves(problem, args.axis, levels, xi=xi, n=args.n, jobs=args.jobs)
    rows = []
    for c in curves:
        for x, v in zip(c.x, c.values):
            rows.append({"axis": c.axis, "level": c.level, "q_star": c.q_star,
                         "cutoff": c.cutoff, "xi": x, "terminal_wealth": v})
    return problem, {"curves": rows}


def cmd_policy(args):
    problem = _problem(args)
    T = problem.market.horizon
    t = T - 1.0 if args.t is None else args.t
    if not 0 <= t < T:
        raise UsageError("--t must lie in [0, T)")
    levels = args.levels or AXIS_DEFAULTS[args.axis]
    return problem, {"curves": fraction_curves(problem, args.axis, levels, t, jobs=args.jobs)}


def cmd_simulate(args):
    if args.paths < 1:
        raise UsageError("--paths must be positive")
    if args.steps < 100:
        raise UsageError("--steps must be at least 100")
    problem = _problem(args)
    rep = simulation_report(problem, args.paths, args.seed, args.steps, args.wealth_paths,
                            args.jobs)
    if args.dump:
        sol = solve_problem(problem)
        b = simulate(sol.policy, min(args.paths, 100), args.steps, args.seed, jobs=1)
        dump_paths(b, args.dump)
    rows = []
    for c in rep["checks"]:
        if c["check"] == "budget":
            rows.append({"check": "budget", "source": c["source"], "statistic": c["mean"],
                         "target": c["target"], "se": c["se"], "passed": c["passed"]})
        elif c["check"] == "supermartingale":
            last = c["rows"][-1]
            rows.append({"check": "supermartingale", "source": c["source"],
                         "statistic": last["mean"], "target": c["rows"][0]["mean"],
                         "se": last["se"], "passed": c["passed"]})
        else:
            rows.append({"check": "filter_slope", "source": "observation",
                         "statistic": c["slope"], "target": 1.0, "se": c["se"],
                         "passed": c["slope_passed"]})
            rows.append({"check": "filter_concentration", "source": "observation",
                         "statistic": c["frac_mass_above_level"], "target": c["level"],
                         "se": None, "passed": c["concentration_passed"]})
    summary = [{k: rep[k] for k in ("q_star", "kappa_star", "n_paths", "wealth_paths",
                                    "n_steps", "seed", "clamped_paths", "passed")}]
    return problem, {"checks": rows, "summary": summary}


COMMANDS = {
    "solve": (cmd_solve, "solve one configuration"),
    "table-raa": (cmd_table_raa, "worst-case weight across relative ambiguity aversion"),
    "table-aaa": (cmd_table_aaa, "worst-case weight across absolute ambiguity aversion"),
    "factorial": (cmd_factorial, "2x2x2 design over prior, risk and ambiguity aversion"),
    "frontier": (cmd_frontier, "terminal wealth against the state-price density"),
    "policy": (cmd_policy, "risky fraction against wealth"),
    "simulate": (cmd_simulate, "Monte Carlo validation of the optimal policy"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file (looked up in $AMBIPORT_CONFIG_DIR too)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=int, default=1, help="worker threads")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="ambiport", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ambiport {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("table-raa", "table-aaa"):
            p.add_argument("--levels", type=_levels, help="comma-separated levels")
        if name in ("frontier", "policy"):
            p.add_argument("--axis", choices=tuple(AXIS_DEFAULTS), default="raa")
            p.add_argument("--levels", type=_levels, help="comma-separated levels")
        if name == "frontier":
            p.add_argument("--xi-max", type=float, default=None)
            p.add_argument("--n", type=int, default=400)
        if name == "policy":
            p.add_argument("--t", type=float, default=None, help="time (default T - 1)")
        if name == "simulate":
            p.add_argument("--paths", type=int, default=100_000)
            p.add_argument("--steps", type=int, default=500)
            p.add_argument("--wealth-paths", type=int, default=2000)
            p.add_argument("--dump", help="CSV file for the first 100 simulated paths")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be positive")
    if args.seed < 0:
        parser.error("--seed must be non-negative")
    fn = COMMANDS[args.command][0]
    try:
        problem, tables = fn(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return 2
    except (UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    text = render(tables, args.command, problem, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
