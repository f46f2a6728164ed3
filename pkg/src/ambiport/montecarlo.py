"""Path simulation of the observation, the filter and the managed wealth.

Each path owns a Philox stream keyed by ``(seed, path index)`` and turns its
raw 64-bit output into normals by the inverse CDF, so a path's draws do not
depend on how many paths run or how they are split across threads.

Wealth is carried two ways: by the self-financing recursion driven by the
hedge, and by reading the wealth surface at the current observation.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .filtering import log_kernel_F, posterior_mean
from .model import DiscretePrior, theta_of
from .solver import SolvedPolicy, surface_and_gradient, terminal_wealth, wealth_surface

__all__ = [
    "PathBundle",
    "simulate",
    "path_normals",
    "supermartingale_check",
    "filter_consistency",
    "budget_identity",
    "dump_paths",
]

S_MIN = 1e-4
BLOCK = 2048
MODES = ("prior", "fixed")


def _generator(seed: int, path: int) -> np.random.Philox:
    return np.random.Philox(key=(int(seed) << 64) | int(path))


def path_normals(seed: int, path: int, n: int) -> tuple[float, np.ndarray]:
    """One uniform for the drift draw followed by ``n`` standard normals."""
    raw = _generator(seed, path).random_raw(n + 1)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return float(u[0]), special.ndtri(u[1:])


@dataclass
class PathBundle:
    """Simulated paths on the recorded grid ``times``.

    Array fields are ``(n_paths, len(times))``; wealth arrays are ``None``
    when wealth was not simulated.  ``reg`` holds the running sums of the
    innovation regression over every step, ``clamped`` counts paths whose
    recursive wealth was stopped at zero.
    """

    seed: int
    n_steps: int
    horizon: float
    mode: str
    times: np.ndarray
    Y: np.ndarray
    theta_hat: np.ndarray
    Z: np.ndarray
    theta_true: np.ndarray
    W_sde: np.ndarray | None = None
    W_surface: np.ndarray | None = None
    pi: np.ndarray | None = None
    reg: dict = field(default_factory=dict)
    clamped: int = 0

    @property
    def n_paths(self) -> int:
        return self.Y.shape[0]


def _record_index(n_steps, record_every):
    idx = list(range(0, n_steps + 1, record_every))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx)


def _simulate_block(policy, paths, seed, n_steps, draw_atoms, draw_cum, fixed_theta, rec,
                    wealth, method):
    kernel = policy.kernel
    m = policy.market
    T, r, sig = m.horizon, m.r, m.sigma
    dt = T / n_steps
    sq = math.sqrt(dt)
    nb = len(paths)
    u0 = np.empty(nb)
    eps = np.empty((nb, n_steps))
    for j, p in enumerate(paths):
        u0[j], eps[j] = path_normals(seed, p, n_steps)
    if fixed_theta is None:
        k = np.searchsorted(draw_cum, u0, side="right")
        k = np.minimum(k, len(draw_atoms) - 1)
        Z = np.asarray(draw_atoms)[k]
    else:
        Z = np.full(nb, m.r + m.sigma * fixed_theta)
    th = theta_of(Z, m)

    nrec = len(rec)
    Yr = np.empty((nb, nrec))
    Hr = np.empty((nb, nrec))
    Wa = np.empty((nb, nrec)) if wealth else None
    Wb = np.empty((nb, nrec)) if wealth else None
    Pr = np.empty((nb, nrec)) if wealth else None
    sxx = sxy = syy = 0.0
    nobs = 0
    y = np.zeros(nb)
    disc_w = np.full(nb, policy.initial_wealth)
    clamped = np.zeros(nb, dtype=bool)
    ri = 0
    for k in range(n_steps + 1):
        t = k * dt
        that = np.asarray(posterior_mean(t, y, kernel))
        if wealth:
            s = T - t
            if k < n_steps:
                surf, grad = surface_and_gradient(max(s, S_MIN), y, policy, method, adaptive=False)
                if s < S_MIN:
                    surf = wealth_surface(s, y, policy, adaptive=False)
            else:
                surf = np.asarray(wealth_surface(0.0, y, policy))
                grad = np.full(nb, np.nan)
        if ri < nrec and rec[ri] == k:
            Yr[:, ri] = y
            Hr[:, ri] = that
            if wealth:
                Wa[:, ri] = disc_w * math.exp(r * t)
                Wb[:, ri] = surf
                Pr[:, ri] = grad / sig
            ri += 1
        if k == n_steps:
            break
        dy = th * dt + sq * eps[:, k]
        x = that * dt
        sxx += float(x @ x)
        sxy += float(x @ dy)
        syy += float(dy @ dy)
        nobs += nb
        if wealth:
            disc_w = disc_w + math.exp(-r * t) * grad * dy
            neg = disc_w < 0
            clamped |= neg
            disc_w = np.where(neg, 0.0, disc_w)
        y = y + dy
    return dict(Y=Yr, H=Hr, Wa=Wa, Wb=Wb, P=Pr, Z=Z, th=th,
                reg=(sxx, sxy, syy, nobs), clamped=int(clamped.sum()))


def simulate(policy: SolvedPolicy, n_paths: int, n_steps: int = 500, seed: int = 0,
             mode: str = "prior", z: float | None = None, draw_prior: DiscretePrior | None = None,
             wealth: bool = True, method: str = "jump", record_every: int = 1,
             jobs: int = 1) -> PathBundle:
    """Simulate ``n_paths`` paths on an ``n_steps`` grid over ``[0, T]``.

    ``mode="prior"`` draws each path's drift from ``draw_prior`` (default:
    the policy's own prior); ``mode="fixed"`` uses drift ``z`` on every path.
    The observation increments are exact for a constant drift; the wealth
    recursion is left-point Euler in discounted units, absorbed at zero.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if n_steps < 100:
        raise ValueError("n_steps must be at least 100")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    m = policy.market
    fixed_theta = None
    atoms, cum = (), np.empty(0)
    if mode == "fixed":
        if z is None:
            raise ValueError("fixed mode needs a drift z")
        fixed_theta = theta_of(float(z), m)
    else:
        prior = draw_prior or policy.kernel.prior
        if prior is None:
            raise ValueError("no prior to draw drifts from")
        atoms = prior.atoms
        cum = np.cumsum(prior.probs)[:-1]
    rec = _record_index(n_steps, record_every)
    blocks = [range(a, min(a + BLOCK, n_paths)) for a in range(0, n_paths, BLOCK)]

    def run(b):
        return _simulate_block(policy, b, seed, n_steps, atoms, cum, fixed_theta, rec, wealth,
                               method)

    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]

    def cat(key):
        if parts[0][key] is None:
            return None
        return np.concatenate([p[key] for p in parts])

    reg = np.sum([p["reg"] for p in parts], axis=0)
    times = rec * (m.horizon / n_steps)
    return PathBundle(
        seed=seed, n_steps=n_steps, horizon=m.horizon, mode=mode, times=times,
        Y=cat("Y"), theta_hat=cat("H"), Z=cat("Z"), theta_true=cat("th"),
        W_sde=cat("Wa"), W_surface=cat("Wb"), pi=cat("P"),
        reg={"sxx": reg[0], "sxy": reg[1], "syy": reg[2], "n": int(reg[3])},
        clamped=sum(p["clamped"] for p in parts),
    )


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf


def budget_identity(bundle: PathBundle, policy: SolvedPolicy, source: str = "surface") -> dict:
    """Sample mean of ``xi_T * W_T`` against initial wealth."""
    W = bundle.W_sde if source == "sde" else bundle.W_surface
    yT = bundle.Y[:, -1]
    if W is None:
        W = np.asarray(terminal_wealth(policy, _xi(policy, yT)))
    else:
        W = W[:, -1]
    mean, se = _mean_se(_xi(policy, yT) * W)
    w = policy.initial_wealth
    z = (mean - w) / se if se > 0 else (0.0 if mean == w else math.inf)
    return {"check": "budget", "source": source, "mean": mean, "se": se, "target": w,
            "z_score": z, "passed": abs(z) <= 3.0}


def _xi(policy, yT):
    m = policy.market
    return np.exp(-m.r * m.horizon - np.asarray(log_kernel_F(m.horizon, yT, policy.kernel)))


def supermartingale_check(bundle: PathBundle, policy: SolvedPolicy, checkpoints=None,
                          source: str = "sde") -> dict:
    """Deflated wealth ``exp(-r t) W_t / F(t, Y_t)`` at checkpoint times.

    Passes when no checkpoint mean exceeds its predecessor by more than three
    combined standard errors.
    """
    W = bundle.W_sde if source == "sde" else bundle.W_surface
    if W is None:
        raise ValueError("bundle carries no wealth")
    T = bundle.horizon
    if checkpoints is None:
        checkpoints = [0.0, T / 4, T / 2, 3 * T / 4, T]
    r = policy.market.r
    rows = []
    for tc in checkpoints:
        j = int(np.argmin(np.abs(bundle.times - tc)))
        t = float(bundle.times[j])
        lf = np.asarray(log_kernel_F(t, bundle.Y[:, j], policy.kernel))
        mean, se = _mean_se(np.exp(-r * t - lf) * W[:, j])
        if not math.isfinite(se):
            se = 0.0
        rows.append({"t": t, "mean": mean, "se": se})
    ok = True
    for a, b in zip(rows, rows[1:]):
        if b["mean"] - a["mean"] > 3.0 * math.hypot(a["se"], b["se"]):
            ok = False
    w = policy.initial_wealth
    flat = all(abs(row["mean"] - w) <= 3.0 * max(row["se"], 1e-12 * w) for row in rows)
    return {"check": "supermartingale", "source": source, "rows": rows, "passed": ok,
            "flat": flat}


def filter_consistency(bundle: PathBundle, policy: SolvedPolicy, level: float = 0.9) -> dict:
    """Innovation regression slope and terminal posterior concentration."""
    reg = bundle.reg
    sxx, sxy, syy, n = reg["sxx"], reg["sxy"], reg["syy"], reg["n"]
    if sxx > 0:
        slope = sxy / sxx
        rss = max(syy - 2 * slope * sxy + slope * slope * sxx, 0.0)
        se = math.sqrt(rss / max(n - 1, 1) / sxx)
    else:
        slope, se = math.nan, math.nan
    kernel = policy.kernel
    T = bundle.horizon
    yT = bundle.Y[:, -1]
    th = kernel.theta_array
    e = kernel.log_weights[:, None] + th[:, None] * yT[None, :] - 0.5 * T * (th * th)[:, None]
    post = np.exp(e - special.logsumexp(e, axis=0))
    idx = np.argmin(np.abs(th[:, None] - bundle.theta_true[None, :]), axis=0)
    mass = post[idx, np.arange(yT.size)]
    frac_mass = float(np.mean(mass > level))
    gap = np.min(np.diff(np.sort(th))) if th.size > 1 else math.inf
    that_T = bundle.theta_hat[:, -1]
    frac_gap = float(np.mean(np.abs(that_T - bundle.theta_true) < 0.5 * gap))
    slope_ok = bool(abs(slope - 1.0) <= 3.0 * se) if math.isfinite(slope) else False
    return {"check": "filter", "slope": slope, "se": se, "slope_passed": slope_ok,
            "frac_mass_above_level": frac_mass, "level": level,
            "concentration_passed": frac_mass > level, "frac_within_half_gap": frac_gap,
            "passed": slope_ok and frac_mass > level}


def dump_paths(bundle: PathBundle, path: str, max_paths: int | None = None) -> None:
    """Write one CSV row per (path, recorded time)."""
    n = bundle.n_paths if max_paths is None else min(max_paths, bundle.n_paths)
    nan = np.full(bundle.Y.shape, np.nan)
    Wa = bundle.W_sde if bundle.W_sde is not None else nan
    Wb = bundle.W_surface if bundle.W_surface is not None else nan
    P = bundle.pi if bundle.pi is not None else nan
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["path", "t", "Y", "theta_hat", "W_sde", "W_surface", "pi"])
        for i in range(n):
            for j, t in enumerate(bundle.times):
                wr.writerow([i] + [f"{v:.12g}" for v in
                                   (t, bundle.Y[i, j], bundle.theta_hat[i, j], Wa[i, j],
                                    Wb[i, j], P[i, j])])
