"""Market, contract, preference and belief parameters.

Every type here is an immutable dataclass that validates itself on
construction; :func:`validate` gathers the checks for a full problem and
reports all failing fields at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .quadrature import QuadratureSpec

__all__ = [
    "MarketParams",
    "Contract",
    "RiskPrefs",
    "AmbiguitySpec",
    "DiscretePrior",
    "SolverSettings",
    "Problem",
    "theta_of",
    "validate",
]

AMBIGUITY_KINDS = ("neutral", "power", "exponential", "log")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class MarketParams:
    """Risk-free rate, volatility and horizon (annualised)."""

    r: float
    sigma: float
    horizon: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.r) and self.r >= 0, "r must be >= 0")
        _require(math.isfinite(self.sigma) and self.sigma > 0, "sigma must be > 0")
        _require(math.isfinite(self.horizon) and self.horizon > 0, "horizon must be > 0")


@dataclass(frozen=True)
class Contract:
    """Option-based payoff ``delta * (W - K)^+ + C``.

    ``linear=True`` selects the plain payoff ``g(x) = x`` and forces
    ``(delta, K, C) = (1, 0, 0)``.
    """

    delta: float = 0.2
    strike: float = 1.0
    base: float = 0.02
    linear: bool = False

    def __post_init__(self) -> None:
        if self.linear:
            _require(
                (self.delta, self.strike, self.base) == (1.0, 0.0, 0.0),
                "linear mode requires (delta, strike, base) = (1, 0, 0)",
            )
            return
        _require(0 < self.delta <= 1, "delta must lie in (0, 1]")
        _require(math.isfinite(self.strike) and self.strike >= 0, "strike must be >= 0")
        _require(math.isfinite(self.base) and self.base > 0, "base fee must be > 0 in option mode")

    @classmethod
    def linear_payoff(cls) -> "Contract":
        return cls(1.0, 0.0, 0.0, linear=True)

    def payoff(self, x):
        x = np.asarray(x, dtype=float)
        if self.linear:
            return x
        return self.delta * np.maximum(x - self.strike, 0.0) + self.base


@dataclass(frozen=True)
class RiskPrefs:
    """Power utility ``u(x) = x**alpha / alpha``."""

    alpha: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.alpha) and self.alpha < 1 and self.alpha != 0,
                 "alpha must satisfy alpha < 1 and alpha != 0")

    @property
    def rra(self) -> float:
        return 1.0 - self.alpha

    @classmethod
    def from_rra(cls, rra: float) -> "RiskPrefs":
        return cls(1.0 - rra)


@dataclass(frozen=True)
class AmbiguitySpec:
    """Ambiguity aggregator.

    ``param`` is lambda for the power kind (RAA = 1 - lambda), gamma for the
    exponential kind and unused otherwise.
    """

    kind: str = "neutral"
    param: float | None = None

    def __post_init__(self) -> None:
        _require(self.kind in AMBIGUITY_KINDS, f"unknown ambiguity kind {self.kind!r}")
        if self.kind == "power":
            _require(self.param is not None and math.isfinite(self.param), "power kind needs lambda")
            _require(self.param < 1 and self.param != 0, "lambda must satisfy lambda < 1, lambda != 0")
        elif self.kind == "exponential":
            _require(self.param is not None and math.isfinite(self.param) and self.param > 0,
                     "gamma must be > 0")
        else:
            _require(self.param is None, f"{self.kind} kind takes no parameter")

    @classmethod
    def neutral(cls) -> "AmbiguitySpec":
        return cls("neutral")

    @classmethod
    def power(cls, lam: float) -> "AmbiguitySpec":
        return cls("power", float(lam))

    @classmethod
    def from_raa(cls, raa: float) -> "AmbiguitySpec":
        return cls("power", 1.0 - float(raa))

    @classmethod
    def exponential(cls, gamma: float) -> "AmbiguitySpec":
        return cls("exponential", float(gamma))

    @classmethod
    def log(cls) -> "AmbiguitySpec":
        return cls("log")

    @property
    def lam(self) -> float:
        if self.kind != "power":
            raise AttributeError("lambda only defined for the power kind")
        return self.param

    @property
    def raa(self) -> float:
        return 1.0 - self.lam

    @property
    def gamma(self) -> float:
        if self.kind != "exponential":
            raise AttributeError("gamma only defined for the exponential kind")
        return self.param


@dataclass(frozen=True)
class DiscretePrior:
    """Finite-support belief over the drift ``Z``.

    Atoms are strictly increasing; every weight is positive and the weights
    sum to one within 1e-12.
    """

    atoms: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        atoms = tuple(float(a) for a in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        _require(len(atoms) >= 1, "prior needs at least one atom")
        _require(len(atoms) == len(probs), "atoms and probabilities differ in length")
        _require(all(math.isfinite(a) for a in atoms), "atoms must be finite")
        _require(len(set(atoms)) == len(atoms), "duplicate atoms")
        _require(all(b > a for a, b in zip(atoms, atoms[1:])), "atoms must be strictly increasing")
        _require(all(p > 0 for p in probs),
                 "every atom needs positive probability (equivalent priors only)")
        _require(abs(math.fsum(probs) - 1.0) <= 1e-12, "probabilities must sum to 1")

    @classmethod
    def two_point(cls, z1: float, z2: float, q: float) -> "DiscretePrior":
        """``q`` is the probability of the larger drift ``z2``."""
        return cls((z1, z2), (1.0 - q, q))

    @classmethod
    def point_mass(cls, z: float) -> "DiscretePrior":
        return cls((z,), (1.0,))

    def with_probs(self, probs: Sequence[float]) -> "DiscretePrior":
        return DiscretePrior(self.atoms, tuple(probs))

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def z1(self) -> float:
        return self.atoms[0]

    @property
    def z2(self) -> float:
        self._two_point_only()
        return self.atoms[1]

    @property
    def q(self) -> float:
        self._two_point_only()
        return self.probs[1]

    @property
    def mean(self) -> float:
        return math.fsum(a * p for a, p in zip(self.atoms, self.probs))

    def _two_point_only(self) -> None:
        if self.size != 2:
            raise AttributeError("two-point accessor used on a prior with %d atoms" % self.size)


def theta_of(z, market: MarketParams):
    """Market price of risk ``(z - r) / sigma``."""
    return (z - market.r) / market.sigma


@dataclass(frozen=True)
class SolverSettings:
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    envelope_tol: float = 1e-10
    budget_rtol: float = 1e-10
    q_eps: float = 1e-4
    grid_step: float = 0.01
    golden_width: float = 1e-5

    def __post_init__(self) -> None:
        _require(self.envelope_tol > 0, "envelope_tol must be > 0")
        _require(0 < self.budget_rtol <= 1e-8, "budget_rtol must lie in (0, 1e-8]")
        _require(0 < self.q_eps < 0.5, "q_eps must lie in (0, 0.5)")
        _require(0 < self.grid_step < 0.5, "grid_step must lie in (0, 0.5)")
        _require(0 < self.golden_width < self.grid_step, "golden_width must be below grid_step")


@dataclass(frozen=True)
class Problem:
    """A fully specified delegated-portfolio problem."""

    market: MarketParams
    contract: Contract
    risk: RiskPrefs
    ambiguity: AmbiguitySpec
    prior: DiscretePrior
    initial_wealth: float = 10.0
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        _require(math.isfinite(self.initial_wealth) and self.initial_wealth > 0,
                 "initial wealth must be > 0")
        if self.ambiguity.kind in ("power", "log"):
            _require(0 < self.risk.alpha < 1,
                     f"{self.ambiguity.kind} aggregator requires positive utility (alpha in (0, 1));"
                     " power-power requires positive utility")

    def replace(self, **changes: Any) -> "Problem":
        from dataclasses import replace

        return replace(self, **changes)


_SECTIONS = {
    "market": ("r", "sigma", "horizon", "initial_wealth"),
    "contract": ("delta", "strike", "base", "linear"),
    "risk": ("alpha",),
    "ambiguity": ("kind", "lambda", "raa", "gamma"),
    "prior": ("z", "p"),
    "solver": ("nodes", "tail_width", "panel_width", "rtol", "atol", "max_refine",
               "envelope_tol", "budget_rtol", "q_eps", "grid_step", "golden_width"),
}


def _collect(errors: list[str], name: str, build):
    try:
        return build()
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"{name}: {exc}")
        return None


def _num(section: Mapping[str, Any], key: str, default=None) -> float:
    if key not in section:
        if default is None:
            raise KeyError(f"missing key {key!r}")
        return default
    return float(section[key])


def _flag(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _floats(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        return tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
    return tuple(float(v) for v in value)


def validate(config: Mapping[str, Mapping[str, Any]]) -> Problem:
    """Build a :class:`Problem` from a nested mapping of config sections.

    All failing fields are reported together in a :class:`ConfigError`.
    """
    errors: list[str] = []
    for name, section in config.items():
        if name not in _SECTIONS:
            errors.append(f"{name}: unknown section")
            continue
        for key in section:
            if key not in _SECTIONS[name]:
                errors.append(f"{name}.{key}: unknown key")
    get = lambda name: config.get(name, {})  # noqa: E731

    mk = get("market")
    market = _collect(errors, "market", lambda: MarketParams(
        _num(mk, "r"), _num(mk, "sigma"), _num(mk, "horizon")))
    wealth = _collect(errors, "market.initial_wealth", lambda: _num(mk, "initial_wealth", 10.0))

    ct = get("contract")

    def build_contract():
        if _flag(ct.get("linear", False)):
            return Contract(_num(ct, "delta", 1.0), _num(ct, "strike", 0.0), _num(ct, "base", 0.0),
                            linear=True)
        return Contract(_num(ct, "delta"), _num(ct, "strike"), _num(ct, "base"))

    contract = _collect(errors, "contract", build_contract)
    risk = _collect(errors, "risk", lambda: RiskPrefs(_num(get("risk"), "alpha")))

    am = get("ambiguity")

    def build_ambiguity():
        kind = str(am.get("kind", "neutral")).strip().lower()
        if kind == "power":
            if ("lambda" in am) == ("raa" in am):
                raise ValueError("power kind needs exactly one of lambda or raa")
            lam = float(am["lambda"]) if "lambda" in am else 1.0 - float(am["raa"])
            return AmbiguitySpec.power(lam)
        if kind == "exponential":
            return AmbiguitySpec.exponential(_num(am, "gamma"))
        extra = [k for k in ("lambda", "raa", "gamma") if k in am]
        if extra:
            raise ValueError(f"{kind} kind takes no parameter (got {', '.join(extra)})")
        return AmbiguitySpec(kind)

    ambiguity = _collect(errors, "ambiguity", build_ambiguity)

    pr = get("prior")
    prior = _collect(errors, "prior", lambda: DiscretePrior(_floats(pr["z"]), _floats(pr["p"])))

    sv = get("solver")

    def build_solver():
        defaults = QuadratureSpec()
        quad = QuadratureSpec(
            nodes=int(sv.get("nodes", defaults.nodes)),
            tail_width=_num(sv, "tail_width", defaults.tail_width),
            panel_width=_num(sv, "panel_width", defaults.panel_width),
            rtol=_num(sv, "rtol", defaults.rtol),
            atol=_num(sv, "atol", defaults.atol),
            max_refine=int(sv.get("max_refine", defaults.max_refine)),
        )
        base = SolverSettings()
        return SolverSettings(
            quadrature=quad,
            envelope_tol=_num(sv, "envelope_tol", base.envelope_tol),
            budget_rtol=_num(sv, "budget_rtol", base.budget_rtol),
            q_eps=_num(sv, "q_eps", base.q_eps),
            grid_step=_num(sv, "grid_step", base.grid_step),
            golden_width=_num(sv, "golden_width", base.golden_width),
        )

    solver = _collect(errors, "solver", build_solver)

    if errors:
        raise ConfigError(errors)
    problem = _collect(errors, "problem", lambda: Problem(
        market, contract, risk, ambiguity, prior, wealth, solver))
    if errors:
        raise ConfigError(errors)
    return problem


def to_config(problem: Problem) -> dict[str, dict[str, str]]:
    """Inverse of :func:`validate`; floats are written with ``repr`` so parsing is exact."""
    f = repr
    c = problem.contract
    amb: dict[str, str] = {"kind": problem.ambiguity.kind}
    if problem.ambiguity.kind == "power":
        amb["lambda"] = f(problem.ambiguity.lam)
    elif problem.ambiguity.kind == "exponential":
        amb["gamma"] = f(problem.ambiguity.gamma)
    q = problem.solver.quadrature
    s = problem.solver
    return {
        "market": {"r": f(problem.market.r), "sigma": f(problem.market.sigma),
                   "horizon": f(problem.market.horizon),
                   "initial_wealth": f(problem.initial_wealth)},
        "contract": {"delta": f(c.delta), "strike": f(c.strike), "base": f(c.base),
                     "linear": "true" if c.linear else "false"},
        "risk": {"alpha": f(problem.risk.alpha)},
        "ambiguity": amb,
        "prior": {"z": ", ".join(f(z) for z in problem.prior.atoms),
                  "p": ", ".join(f(p) for p in problem.prior.probs)},
        "solver": {"nodes": str(q.nodes), "tail_width": f(q.tail_width),
                   "panel_width": f(q.panel_width), "rtol": f(q.rtol), "atol": f(q.atol),
                   "max_refine": str(q.max_refine), "envelope_tol": f(s.envelope_tol),
                   "budget_rtol": f(s.budget_rtol), "q_eps": f(s.q_eps),
                   "grid_step": f(s.grid_step), "golden_width": f(s.golden_width)},
    }
