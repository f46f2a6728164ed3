"""Penalised value of a candidate prior and the outer search for the worst one.

For a candidate ``Q`` equivalent to the reference prior ``P`` the agent
solves the Bayesian problem under ``Q`` and pays a penalty that depends on
``dQ/dP``:

    power        V(Q)^+ * (E_P[(dQ/dP)^(lam/(lam-1))])^((1-lam)/lam)
    exponential  V(Q) + E_Q[log dQ/dP] / gamma
    log          V(Q)^+ * exp(-E_P[log dQ/dP])

The worst prior minimises this over the interior of the simplex.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import AbsoluteContinuityError, NumericalError
from .model import AmbiguitySpec, DiscretePrior, Problem
from .solver import SolvedPolicy, solve_policy, value_function

__all__ = [
    "rn_derivative",
    "penalty_power",
    "penalty_kl",
    "penalty_log_factor",
    "PenaltyEvaluation",
    "objective",
    "WorstCaseResult",
    "PolicyMemo",
    "worst_case_prior",
]

LOG_MAX = math.log(np.finfo(float).max)


def rn_derivative(Q: DiscretePrior, P: DiscretePrior) -> np.ndarray:
    """Per-atom likelihood ratio ``q_i / p_i``."""
    if Q.atoms != P.atoms:
        raise AbsoluteContinuityError("priors must share the same atoms")
    q = np.asarray(Q.probs)
    p = np.asarray(P.probs)
    if np.any(q <= 0) or np.any(p <= 0):
        raise AbsoluteContinuityError("priors must put positive mass on every atom")
    return q / p


def penalty_power(Q: DiscretePrior, P: DiscretePrior, lam: float) -> float:
    if not (lam < 1 and lam != 0):
        raise ValueError("lambda must satisfy lambda < 1, lambda != 0")
    ratio = rn_derivative(Q, P)
    e = lam / (lam - 1.0)
    log_moment = special.logsumexp(e * np.log(ratio), b=np.asarray(P.probs))
    expo = (1.0 - lam) / lam * log_moment
    if expo > LOG_MAX:
        raise NumericalError(f"power penalty overflows (log factor {expo:.4g})")
    return math.exp(expo)


def penalty_kl(Q: DiscretePrior, P: DiscretePrior, gamma: float) -> float:
    """``KL(Q || P) / gamma``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    ratio = rn_derivative(Q, P)
    q = np.asarray(Q.probs)
    return float(np.sum(special.xlogy(q, ratio))) / gamma


def penalty_log_factor(Q: DiscretePrior, P: DiscretePrior) -> float:
    """``exp(KL(P || Q))``; at least one."""
    ratio = rn_derivative(Q, P)
    return math.exp(-float(np.dot(P.probs, np.log(ratio))))


@dataclass(frozen=True)
class PenaltyEvaluation:
    """``objective`` recombines ``value`` and ``penalty`` according to ``kind``.

    ``penalty`` is a multiplicative factor for the power and log kinds and an
    additive term for the exponential kind.
    """

    objective: float
    penalty: float
    value: float
    prior: DiscretePrior
    kind: str
    policy: SolvedPolicy | None = field(default=None, compare=False, repr=False)


def combine(kind: str, value: float, penalty: float) -> float:
    if kind == "exponential":
        return value + penalty
    if kind in ("power", "log"):
        return max(value, 0.0) * penalty
    return value


def objective(Q: DiscretePrior, spec: AmbiguitySpec, problem: Problem,
              policy: SolvedPolicy | None = None) -> PenaltyEvaluation:
    """Penalised value of ``Q``; ``policy`` may pass a solve already made under ``Q``."""
    P = problem.prior
    if spec.kind == "neutral":
        Q = P
        pen = 1.0
    elif spec.kind == "power":
        pen = penalty_power(Q, P, spec.lam)
    elif spec.kind == "exponential":
        pen = penalty_kl(Q, P, spec.gamma)
    else:
        pen = penalty_log_factor(Q, P)
    if policy is None:
        policy = solve_policy(problem, Q)
    V = value_function(policy)
    return PenaltyEvaluation(combine(spec.kind, V, pen), pen, V, Q, spec.kind, policy)


class PolicyMemo:
    """Thread-safe cache of solved policies keyed by rounded prior weights.

    Valid for one base problem; the key ignores everything but the weights.
    """

    def __init__(self, resolution: float = 1e-6):
        self.resolution = resolution
        self._store: dict[tuple[int, ...], SolvedPolicy] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def key(self, probs) -> tuple[int, ...]:
        return tuple(int(round(p / self.resolution)) for p in probs)

    def get(self, problem: Problem, Q: DiscretePrior) -> SolvedPolicy:
        k = self.key(Q.probs)
        with self._lock:
            hit = self._store.get(k)
            if hit is not None:
                self.hits += 1
                return hit
        pol = solve_policy(problem, Q)
        with self._lock:
            self.misses += 1
            return self._store.setdefault(k, pol)

    def __len__(self) -> int:
        return len(self._store)


@dataclass(frozen=True)
class WorstCaseResult:
    """Outcome of the outer minimisation.

    ``q_star`` is the weight on the larger drift for two-atom priors and
    ``None`` otherwise; ``probs`` always holds the full weight vector.
    ``grid`` lists every coarse-grid ``(q, objective)`` pair.
    """

    q_star: float | None
    probs: tuple[float, ...]
    objective: float
    evaluation: PenaltyEvaluation
    policy: SolvedPolicy
    prior_objective: float
    evaluations: int
    bracket: tuple[float, float] | None
    grid: tuple[tuple[float, float], ...] = ()


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(f, a, b, width):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def worst_case_prior(spec: AmbiguitySpec, problem: Problem, jobs: int = 1,
                     memo: PolicyMemo | None = None) -> WorstCaseResult:
    """Minimise the penalised value over priors equivalent to ``problem.prior``.

    Two atoms: coarse grid on ``[eps, 1 - eps]`` then golden section inside
    the cell pair around the grid minimum.  More atoms: Nelder-Mead on
    log-odds started from the best of a handful of interior points.
    """
    memo = memo if memo is not None else PolicyMemo()
    P = problem.prior
    s = problem.solver
    count = [0]
    lock = threading.Lock()

    def evaluate(Q):
        with lock:
            count[0] += 1
        return objective(Q, spec, problem, memo.get(problem, Q))

    base = evaluate(P)
    if spec.kind == "neutral":
        q = P.q if P.size == 2 else None
        return WorstCaseResult(q, P.probs, base.objective, base, base.policy, base.objective,
                               count[0], None)

    eps = s.q_eps

    if P.size == 2:
        def f_q(q):
            try:
                return evaluate(P.with_probs((1.0 - q, q)))
            except (NumericalError, ValueError):
                return None

        n = int(math.floor((1.0 - 2 * eps) / s.grid_step))
        qs = sorted(set([eps, 1.0 - eps, P.q] + [round((k + 1) * s.grid_step, 12)
                                                 for k in range(n) if (k + 1) * s.grid_step < 1 - eps]))
        evs = _map(f_q, qs, jobs)
        vals = np.array([e.objective if e is not None else np.inf for e in evs])
        if not np.isfinite(vals).any():
            raise NumericalError("every grid evaluation failed")
        i = int(np.argmin(vals))
        a, b = qs[max(i - 1, 0)], qs[min(i + 1, len(qs) - 1)]

        def f_obj(q):
            e = f_q(q)
            return np.inf if e is None else e.objective

        q_best, v_best = qs[i], vals[i]
        if b - a > s.golden_width:
            qg, vg = _golden(f_obj, a, b, s.golden_width)
            if vg < v_best:
                q_best, v_best = qg, vg
        ev = f_q(q_best)
        return WorstCaseResult(q_best, ev.prior.probs, ev.objective, ev, ev.policy,
                               base.objective, count[0], (a, b),
                               tuple(zip(qs, vals.tolist())))

    # general simplex
    n = P.size
    p = np.asarray(P.probs)

    def to_probs(z):
        w = special.softmax(np.append(z, 0.0))
        w = np.maximum(w, eps)
        return tuple(w / w.sum())

    def f_z(z):
        try:
            return evaluate(P.with_probs(to_probs(z))).objective
        except (NumericalError, ValueError):
            return np.inf

    starts = [p] + [np.maximum(0.5 * p + 0.5 * np.eye(n)[k], eps) for k in range(n)]
    starts = [st / st.sum() for st in starts]
    zs = [np.log(st[:-1] / st[-1]) for st in starts]
    svals = _map(f_z, zs, jobs)
    if not np.isfinite(svals).any():
        raise NumericalError("every start evaluation failed")
    z0 = zs[int(np.argmin(svals))]
    res = optimize.minimize(f_z, z0, method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400 * n})
    ev = evaluate(P.with_probs(to_probs(res.x)))
    return WorstCaseResult(None, ev.prior.probs, ev.objective, ev, ev.policy, base.objective,
                           count[0], None)
