"""Pointwise maximiser of ``u(g(x)) - y*x`` for the option payoff.

The composed objective ``u(g(x))`` is flat on ``[0, K]`` and concave beyond,
so the maximiser is either zero or on the interior branch
``h(y) = (I(y / delta) - C) / delta + K``.  The switch happens at the root
``y_hat`` of the gain function ``gap(y) = u(g(h(y))) - u(C) - y * h(y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RootFindingError
from .model import Contract

__all__ = [
    "EnvelopeSolution",
    "utility",
    "inverse_marginal",
    "interior_branch",
    "concavification_gap",
    "solve_concavification_point",
    "optimal_demand",
    "brute_force_demand",
]


def utility(x, alpha):
    x = np.asarray(x, dtype=float)
    return np.power(x, alpha) / alpha


def inverse_marginal(x, alpha):
    """``I(x) = x ** (1 / (alpha - 1))``, the inverse of ``u'``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("inverse marginal utility needs x > 0")
    out = np.power(x, 1.0 / (alpha - 1.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class EnvelopeSolution:
    """Switching level ``y_hat`` together with the data that defines it.

    In linear mode ``y_hat`` is ``inf`` and the maximiser is simply ``I``.
    """

    y_hat: float
    contract: Contract
    alpha: float
    tol: float

    @property
    def upper(self) -> float:
        """Right end of the interior branch domain, ``delta * C**(alpha - 1)``."""
        c = self.contract
        if c.linear:
            return math.inf
        return c.delta * c.base ** (self.alpha - 1.0)

    @property
    def jump(self) -> float:
        """Size of the downward jump of the maximiser at ``y_hat``."""
        if self.contract.linear or self.contract.strike == 0:
            return 0.0
        return float(interior_branch(self.y_hat, self))


def _h(y, contract, alpha):
    return (np.power(y / contract.delta, 1.0 / (alpha - 1.0)) - contract.base) / contract.delta \
        + contract.strike


def interior_branch(y, env: EnvelopeSolution):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)) or np.any(~(y < env.upper)):
        raise ValueError("interior branch defined only on (0, delta * C**(alpha - 1))")
    out = _h(y, env.contract, env.alpha)
    return out if out.ndim else float(out)


def concavification_gap(y, contract: Contract, alpha: float):
    """``u(g(h(y))) - u(C) - y * h(y)``; strictly decreasing in ``y``.

    Uses ``y * I(y / delta) / delta = I(y / delta)**alpha`` to avoid the
    cancellation between the first and last terms.
    """
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore"):
        ia = np.power(y / contract.delta, alpha / (alpha - 1.0))
    out = ia * (1.0 - alpha) / alpha + y * (contract.base / contract.delta - contract.strike) \
        - contract.base ** alpha / alpha
    return out if out.ndim else float(out)


def solve_concavification_point(contract: Contract, alpha: float, tol: float = 1e-10,
                                max_iter: int = 400) -> EnvelopeSolution:
    if contract.linear:
        return EnvelopeSolution(math.inf, contract, alpha, tol)
    ub = contract.delta * contract.base ** (alpha - 1.0)
    lo, hi = 1e-12 * ub, ub
    f_lo = concavification_gap(lo, contract, alpha)
    if contract.strike == 0:
        # payoff already concave: the interior branch reaches zero demand at ub
        return EnvelopeSolution(ub, contract, alpha, tol)
    f_hi = concavification_gap(hi, contract, alpha)
    if not (f_lo > 0 > f_hi):
        raise RootFindingError(
            f"gap has no sign change on (1e-12*ub, ub): gap(lo)={f_lo:.3g}, gap(ub)={f_hi:.3g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if concavification_gap(mid, contract, alpha) > 0:
            lo = mid
        else:
            hi = mid
    g_lo = concavification_gap(lo, contract, alpha)
    g_hi = concavification_gap(hi, contract, alpha)
    y_hat = lo if abs(g_lo) <= abs(g_hi) else hi
    resid = min(abs(g_lo), abs(g_hi))
    if resid > tol:
        raise RootFindingError(f"switching point residual {resid:.3g} exceeds tol {tol:.3g}")
    return EnvelopeSolution(float(y_hat), contract, alpha, tol)


def optimal_demand(y, env: EnvelopeSolution):
    """Maximiser of ``u(g(x)) - y*x`` over ``x >= 0``; zero for ``y >= y_hat``."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("optimal demand needs y > 0")
    if env.contract.linear:
        out = np.power(y, 1.0 / (env.alpha - 1.0))
    else:
        inside = y < env.y_hat
        out = np.where(inside, _h(np.where(inside, y, env.y_hat), env.contract, env.alpha), 0.0)
    return out if out.ndim else float(out)


def brute_force_demand(y: float, env: EnvelopeSolution, grid_max: float, grid_n: int) -> float:
    """Grid argmax of ``u(g(x)) - y*x`` on ``[0, grid_max]``; ties go to the smaller ``x``."""
    x = np.linspace(0.0, grid_max, grid_n)
    with np.errstate(divide="ignore"):
        obj = utility(env.contract.payoff(x), env.alpha) - y * x
    return float(x[int(np.argmax(obj))])
