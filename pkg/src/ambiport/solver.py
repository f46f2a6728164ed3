"""Martingale-method solution for a fixed (possibly distorted) prior.

The optimal claim is ``X(c / F(T, Y_T))`` with ``c = kappa * exp(-r T)``.
Its time-``t`` value is the Gaussian smoothing of the claim over the
remaining horizon ``s = T - t``; the hedge is the ``y``-derivative of that
surface.  Because the claim jumps where ``c / F = y_hat``, every integral
is split at those observation levels, and the derivative carries one point
term per jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from .envelope import EnvelopeSolution, optimal_demand, solve_concavification_point
from .errors import RootFindingError
from .filtering import FilterKernel, log_kernel_F, posterior_mean
from .model import Contract, DiscretePrior, Problem
from .quadrature import (
    COL_CLAIM,
    COL_GRAD,
    COL_SCORE,
    COL_UTILITY,
    IntegrandParams,
    QuadratureSpec,
    gaussian_smooth,
)

__all__ = [
    "SolvedPolicy",
    "breakpoints",
    "budget",
    "solve_kappa",
    "solve_policy",
    "terminal_wealth",
    "wealth_surface",
    "grad_wealth_surface",
    "surface_and_gradient",
    "optimal_fraction",
    "optimal_amount",
    "value_function",
    "GRADIENT_METHODS",
]

GRADIENT_METHODS = ("jump", "classical", "score")
KAPPA_LO = 1e-8
KAPPA_HI = 1.0
MAX_DOUBLINGS = 200


def _params(env: EnvelopeSolution, kernel: FilterKernel, logc: float) -> IntegrandParams:
    c = env.contract
    return IntegrandParams(
        thetas=kernel.theta_array,
        logp=kernel.log_weights,
        T=kernel.market.horizon,
        logc=logc,
        alpha=env.alpha,
        delta=c.delta,
        K=c.strike,
        C=c.base,
        log_yhat=math.log(env.y_hat) if math.isfinite(env.y_hat) else math.inf,
        linear=c.linear,
    )


def _logc(kappa: float, kernel: FilterKernel) -> float:
    return math.log(kappa) - kernel.market.r * kernel.market.horizon


# -- breakpoints ------------------------------------------------------------


def _bisect(f, a, b, iters=200):
    """Root of ``f`` on ``[a, b]`` with ``f(a) < 0 <= f(b)`` (or reversed)."""
    fa = f(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        fm = f(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _expand(f, start, step, want_positive, limit=1e8):
    """Walk from ``start`` in the direction of ``step`` until ``f`` has the wanted sign."""
    x = start
    while abs(x - start) < limit:
        x = x + step
        v = f(x)
        if (v >= 0) == want_positive:
            return x
        step *= 2.0
    return None


def _breakpoints(logc, log_yhat, kernel: FilterKernel):
    if not math.isfinite(log_yhat):
        return ()
    th = kernel.theta_array
    if np.all(th == 0):
        return ()
    T = kernel.market.horizon
    target = logc - log_yhat
    scale = math.sqrt(T)

    def f(z):
        return log_kernel_F(T, z, kernel) - target

    if th.min() >= 0 or th.max() <= 0:
        sign = 1.0 if th.max() > 0 else -1.0
        up = f(0.0) >= 0
        other = _expand(f, 0.0, (-sign if up else sign) * scale, not up)
        if other is None:
            return ()
        return (_bisect(f, min(0.0, other), max(0.0, other)),)

    # mixed signs: log F is convex with its minimum where the posterior mean vanishes
    def g(z):
        return posterior_mean(T, z, kernel)

    a = _expand(g, 0.0, -scale, False) if g(0.0) >= 0 else 0.0
    b = _expand(g, 0.0, scale, True) if g(0.0) < 0 else 0.0
    z_min = _bisect(g, a, b) if a != b else 0.0
    if f(z_min) >= 0:
        return ()
    out = []
    lo = _expand(f, z_min, -scale, True)
    if lo is not None:
        out.append(_bisect(f, lo, z_min))
    hi = _expand(f, z_min, scale, True)
    if hi is not None:
        out.append(_bisect(f, z_min, hi))
    return tuple(sorted(out))


def breakpoints(kappa: float, env: EnvelopeSolution, kernel: FilterKernel) -> tuple[float, ...]:
    """Terminal observation levels where ``kappa * xi_T`` equals ``y_hat``.

    ``log F(T, .)`` is convex, so there are at most two; one when every drift
    has the same sign relative to the rate.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if env.contract.linear:
        return ()
    return _breakpoints(_logc(kappa, kernel), math.log(env.y_hat), kernel)


# -- budget and multiplier --------------------------------------------------


def budget(kappa: float, env: EnvelopeSolution, kernel: FilterKernel,
           quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Present cost of the claim ``X(kappa * xi_T)``."""
    logc = _logc(kappa, kernel)
    params = _params(env, kernel, logc)
    cuts = _breakpoints(logc, params.log_yhat, kernel)
    T = kernel.market.horizon
    res = gaussian_smooth([0.0], T, cuts, params, COL_CLAIM, quad)
    return math.exp(-kernel.market.r * T) * float(res[0, 0])


@dataclass(frozen=True)
class SolvedPolicy:
    """Optimal claim for one prior: the multiplier plus everything needed to price it."""

    kappa_star: float
    envelope: EnvelopeSolution
    kernel: FilterKernel
    initial_wealth: float
    quadrature: QuadratureSpec
    budget_value: float
    cuts: tuple[float, ...] = field(default=())

    @property
    def params(self) -> IntegrandParams:
        return _params(self.envelope, self.kernel, _logc(self.kappa_star, self.kernel))

    @property
    def market(self):
        return self.kernel.market

    @property
    def cutoff(self) -> float:
        """State-price level ``y_hat / kappa*`` above which the claim pays nothing."""
        return self.envelope.y_hat / self.kappa_star

    @property
    def budget_residual(self) -> float:
        return abs(self.budget_value - self.initial_wealth)


def solve_kappa(w: float, env: EnvelopeSolution, kernel: FilterKernel,
                quad: QuadratureSpec = QuadratureSpec(), rtol: float = 1e-10) -> SolvedPolicy:
    """Multiplier with ``budget(kappa) = w``; the budget is strictly decreasing."""
    if not w > 0:
        raise ValueError("initial wealth must be positive")

    def excess(logk):
        return budget(math.exp(logk), env, kernel, quad) - w

    lo, hi = math.log(KAPPA_LO), math.log(KAPPA_HI)
    f_lo = excess(lo)
    n = 0
    while f_lo < 0:
        n += 1
        if n > MAX_DOUBLINGS:
            raise RootFindingError("could not find a multiplier with budget above w")
        hi, lo = lo, lo - math.log(2.0)
        f_lo = excess(lo)
    f_hi = excess(hi)
    n = 0
    while f_hi > 0:
        n += 1
        if n > MAX_DOUBLINGS:
            raise RootFindingError("budget stays above w after 200 doublings of kappa")
        lo, f_lo = hi, f_hi
        hi += math.log(2.0)
        f_hi = excess(hi)
    if f_hi == 0:
        logk = hi
    else:
        logk = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                               maxiter=500)
    kappa = math.exp(logk)
    chi = budget(kappa, env, kernel, quad)
    if abs(chi - w) > rtol * w:
        raise RootFindingError(f"budget residual {abs(chi - w):.3g} exceeds {rtol * w:.3g}")
    cuts = breakpoints(kappa, env, kernel)
    return SolvedPolicy(kappa, env, kernel, float(w), quad, chi, cuts)


@lru_cache(maxsize=64)
def _envelope(contract: Contract, alpha: float, tol: float) -> EnvelopeSolution:
    return solve_concavification_point(contract, alpha, tol)


def solve_policy(problem: Problem, prior: DiscretePrior | None = None) -> SolvedPolicy:
    """Solve the ambiguity-neutral problem under ``prior`` (default: the problem's prior)."""
    s = problem.solver
    env = _envelope(problem.contract, problem.risk.alpha, s.envelope_tol)
    kernel = FilterKernel.from_prior(prior or problem.prior, problem.market)
    return solve_kappa(problem.initial_wealth, env, kernel, s.quadrature, s.budget_rtol)


# -- claim, surface and hedge -----------------------------------------------


def terminal_wealth(policy: SolvedPolicy, xi):
    """``X(kappa* xi)``: interior branch below the cutoff, zero at and above it."""
    return optimal_demand(policy.kappa_star * np.asarray(xi, dtype=float), policy.envelope)


def _claim_at(policy: SolvedPolicy, y):
    T = policy.market.horizon
    lf = np.asarray(log_kernel_F(T, y, policy.kernel))
    return optimal_demand(np.exp(policy.params.logc - lf), policy.envelope)


def _check_s(s, policy):
    if not 0 <= s <= policy.market.horizon * (1 + 1e-12):
        raise ValueError("remaining time must lie in [0, T]")


def _ret(y, out):
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def wealth_surface(s: float, y, policy: SolvedPolicy, adaptive: bool = True):
    """Value with ``s`` years remaining and observation level ``y``."""
    _check_s(s, policy)
    if s == 0:
        out = np.atleast_1d(_claim_at(policy, np.atleast_1d(np.asarray(y, dtype=float))))
        return _ret(y, out)
    res = gaussian_smooth(np.ravel(y), s, policy.cuts, policy.params, COL_CLAIM,
                          policy.quadrature, adaptive)
    return _ret(y, math.exp(-policy.market.r * s) * res[:, 0])


def jump_sizes(policy: SolvedPolicy) -> np.ndarray:
    """Signed jump of the terminal claim at each breakpoint, moving up in ``y``."""
    if not policy.cuts:
        return np.empty(0)
    T = policy.market.horizon
    sign = np.sign(posterior_mean(T, np.asarray(policy.cuts), policy.kernel))
    return sign * policy.envelope.jump


def _jump_term(s, y, policy):
    cuts = np.asarray(policy.cuts)
    if cuts.size == 0:
        return np.zeros(np.size(y))
    d = np.subtract.outer(np.ravel(y), cuts)
    phi = np.exp(-d * d / (2 * s)) / math.sqrt(2 * math.pi * s)
    return phi @ jump_sizes(policy)


def surface_and_gradient(s: float, y, policy: SolvedPolicy, method: str = "jump",
                         adaptive: bool = True):
    """``(Y(s, y), dY/dy(s, y))`` from a single kernel pass."""
    if method not in GRADIENT_METHODS:
        raise ValueError(f"unknown gradient method {method!r}")
    _check_s(s, policy)
    if not s > 0:
        raise ValueError("gradient needs s > 0")
    yy = np.ravel(np.asarray(y, dtype=float))
    col = COL_SCORE if method == "score" else COL_GRAD
    res = gaussian_smooth(yy, s, policy.cuts, policy.params, COL_CLAIM | col,
                          policy.quadrature, adaptive)
    disc = math.exp(-policy.market.r * s)
    if method == "score":
        grad = res[:, 3]
    else:
        grad = res[:, 2]
        if method == "jump":
            grad = grad + _jump_term(s, yy, policy)
    return _ret(y, disc * res[:, 0]), _ret(y, disc * grad)


def grad_wealth_surface(s: float, y, policy: SolvedPolicy, method: str = "jump",
                        adaptive: bool = True):
    """``d/dy`` of :func:`wealth_surface`.

    ``jump`` adds the point mass from each discontinuity of the claim to the
    smooth part; ``classical`` omits it; ``score`` differentiates the
    Gaussian weight instead of the claim.
    """
    if method not in GRADIENT_METHODS:
        raise ValueError(f"unknown gradient method {method!r}")
    _check_s(s, policy)
    if not s > 0:
        raise ValueError("gradient needs s > 0")
    yy = np.ravel(np.asarray(y, dtype=float))
    col = COL_SCORE if method == "score" else COL_GRAD
    res = gaussian_smooth(yy, s, policy.cuts, policy.params, col, policy.quadrature, adaptive)
    if method == "score":
        grad = res[:, 3]
    else:
        grad = res[:, 2]
        if method == "jump":
            grad = grad + _jump_term(s, yy, policy)
    return _ret(y, math.exp(-policy.market.r * s) * grad)


ZERO_WEALTH = 1e-12


def optimal_fraction(t: float, y, policy: SolvedPolicy, method: str = "jump"):
    """Fraction of wealth in the stock, ``dY/dy / (sigma * Y)``.

    ``nan`` where the surface is below ``1e-12 * w`` (no wealth left to split).
    """
    T = policy.market.horizon
    if not 0 <= t < T:
        raise ValueError("t must lie in [0, T)")
    W, G = surface_and_gradient(T - t, y, policy, method)
    W = np.asarray(W, dtype=float)
    G = np.asarray(G, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(W < ZERO_WEALTH * policy.initial_wealth, np.nan,
                         G / (policy.market.sigma * W))
    return float(ratio) if ratio.ndim == 0 else ratio


def optimal_amount(t: float, y, policy: SolvedPolicy, method: str = "jump"):
    """Dollar amount in the stock, ``dY/dy / sigma``."""
    T = policy.market.horizon
    if not 0 <= t < T:
        raise ValueError("t must lie in [0, T)")
    G = grad_wealth_surface(T - t, y, policy, method)
    return G / policy.market.sigma


def value_function(policy: SolvedPolicy) -> float:
    """Expected utility of the managed payoff under the policy's prior."""
    T = policy.market.horizon
    res = gaussian_smooth([0.0], T, policy.cuts, policy.params, COL_UTILITY, policy.quadrature)
    return float(res[0, 1])
