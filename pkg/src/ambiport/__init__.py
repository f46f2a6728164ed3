"""Delegated portfolio choice with an option-like fee, drift learning and smooth ambiguity."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .ambiguity import (
    PenaltyEvaluation,
    PolicyMemo,
    WorstCaseResult,
    objective,
    penalty_kl,
    penalty_log_factor,
    penalty_power,
    rn_derivative,
    worst_case_prior,
)
from .envelope import (
    EnvelopeSolution,
    brute_force_demand,
    interior_branch,
    inverse_marginal,
    optimal_demand,
    solve_concavification_point,
)
from .errors import (
    AbsoluteContinuityError,
    ConfigError,
    NumericalError,
    QuadratureError,
    RootFindingError,
)
from .filtering import (
    FilterKernel,
    kernel_F,
    kernel_Fy,
    posterior,
    posterior_mean,
    state_price_density,
)
from .model import (
    AmbiguitySpec,
    Contract,
    DiscretePrior,
    MarketParams,
    Problem,
    RiskPrefs,
    SolverSettings,
    theta_of,
    to_config,
    validate,
)
from .montecarlo import PathBundle, filter_consistency, simulate, supermartingale_check
from .quadrature import QuadratureSpec
from .solver import (
    SolvedPolicy,
    breakpoints,
    budget,
    grad_wealth_surface,
    optimal_amount,
    optimal_fraction,
    solve_kappa,
    solve_policy,
    terminal_wealth,
    value_function,
    wealth_surface,
)
