"""Exact filter for a drift with finite support.

With ``Y_t`` the observation process (a standard Brownian motion under the
reference measure) the likelihood ratio is the mixture

    F(t, y) = sum_i p_i exp(theta_i y - theta_i**2 t / 2)

and everything else (posterior weights, posterior mean, state prices) is a
ratio of such sums.  All sums are evaluated with the largest exponent
factored out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DiscretePrior, MarketParams, theta_of

__all__ = [
    "FilterKernel",
    "kernel_F",
    "kernel_Fy",
    "log_kernel_F",
    "posterior_mean",
    "posterior",
    "state_price_density",
]


@dataclass(frozen=True)
class FilterKernel:
    thetas: tuple[float, ...]
    weights: tuple[float, ...]
    market: MarketParams
    prior: DiscretePrior | None = None

    def __post_init__(self):
        th = tuple(float(t) for t in self.thetas)
        w = tuple(float(p) for p in self.weights)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "weights", w)
        if len(th) != len(w) or not th:
            raise ValueError("thetas and weights must be non-empty and of equal length")
        if len(set(th)) != len(th):
            raise ValueError("thetas must be distinct")
        if any(not p > 0 for p in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")

    @classmethod
    def from_prior(cls, prior: DiscretePrior, market: MarketParams) -> "FilterKernel":
        th = tuple(theta_of(z, market) for z in prior.atoms)
        return cls(th, prior.probs, market, prior)

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.thetas)

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(np.asarray(self.weights))

    @property
    def prior_mean(self) -> float:
        return math.fsum(p * t for p, t in zip(self.weights, self.thetas))


def _exponents(t, y, k: FilterKernel):
    th = k.theta_array
    y = np.asarray(y, dtype=float)
    e = k.log_weights.reshape((-1,) + (1,) * y.ndim) \
        + np.multiply.outer(th, y) - (0.5 * np.asarray(t, dtype=float)) * (th * th).reshape(
            (-1,) + (1,) * y.ndim)
    return e


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def log_kernel_F(t, y, k: FilterKernel):
    e = _exponents(t, y, k)
    mx = e.max(axis=0)
    return _scalar(mx + np.log(np.exp(e - mx).sum(axis=0)))


def kernel_F(t, y, k: FilterKernel):
    """Mixture likelihood ratio ``F(t, y)``; strictly positive."""
    return _scalar(np.exp(log_kernel_F(t, y, k)))


def kernel_Fy(t, y, k: FilterKernel):
    """``dF/dy = sum_i p_i theta_i exp(theta_i y - theta_i**2 t / 2)``."""
    e = _exponents(t, y, k)
    th = k.theta_array.reshape((-1,) + (1,) * (e.ndim - 1))
    return _scalar((th * np.exp(e)).sum(axis=0))


def _posterior_weights(t, y, k):
    e = _exponents(t, y, k)
    ex = np.exp(e - e.max(axis=0))
    return ex / ex.sum(axis=0)


def posterior_mean(t, y, k: FilterKernel):
    """Filtered market price of risk ``F_y / F``."""
    w = _posterior_weights(t, y, k)
    th = k.theta_array.reshape((-1,) + (1,) * (w.ndim - 1))
    m = (th * w).sum(axis=0)
    return _scalar(np.clip(m, min(k.thetas), max(k.thetas)))


def posterior(t: float, y: float, k: FilterKernel) -> DiscretePrior:
    """Posterior over the drift atoms after observing ``Y_t = y``."""
    if k.prior is None:
        raise ValueError("kernel was not built from a DiscretePrior")
    w = _posterior_weights(t, float(y), k)
    w = np.maximum(w, np.finfo(float).tiny)
    w = w / w.sum()
    return DiscretePrior(k.prior.atoms, tuple(w))


def state_price_density(y_T, k: FilterKernel):
    """``exp(-r T) / F(T, y_T)``."""
    T = k.market.horizon
    return _scalar(np.exp(-k.market.r * T - np.asarray(log_kernel_F(T, y_T, k))))
