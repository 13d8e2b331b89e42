"""Optimal stopping of a linear diffusion and its running maximum.

The solver reduces the two-dimensional problem for (X, S) to a family of
one-dimensional concave-majorant problems indexed by the maximum level s,
producing the value surface, optimal excursion depths, and phase boundaries.
A Monte Carlo oracle provides independent policy-value estimates.
"""

from .diffusion import (Kind, LogPhiClass, Model, ModelSpec, classify_log_phi,
                        eval_fundamentals, make_model)
from .errors import (ConfigError, MaxstopError, ModelError, NoTangencyError,
                     RewardError, TruncationError, UnsupportedModelError,
                     UnsupportedStructureError, ValueInfiniteError)
from .majorant import (PiecewiseMajorant, Side, slope_at, tangent_from_point,
                       upper_concave_envelope)
from .reward import (BUILTIN_REWARDS, BoundaryLimits, RewardSpec,
                     TransformedReward, boundary_limits, effective_reward,
                     lookback_reward, power_sum_reward, put_reward,
                     russian_reward, transform)
from .solver import (Case, ColumnSolution, DiagonalSolution, Region,
                     ValueSurface, find_s_hat, optimal_excursion_depth,
                     optimal_policy, phase_diagram, prop1_value,
                     prop2_objective, smooth_fit_value, solve_column, v_diag,
                     v_surface)
from .mc import (DominanceReport, MCConfig, MCEstimate, hitting_time_check,
                 policy_dominance_test, simulate_policy)
from .config import ProblemConfig, dumps as dump_config, load as load_config, \
    loads as loads_config

__version__ = "0.1.0"

__all__ = [
    "Kind", "LogPhiClass", "Model", "ModelSpec", "classify_log_phi",
    "eval_fundamentals", "make_model",
    "ConfigError", "MaxstopError", "ModelError", "NoTangencyError",
    "RewardError", "TruncationError", "UnsupportedModelError",
    "UnsupportedStructureError", "ValueInfiniteError",
    "PiecewiseMajorant", "Side", "slope_at", "tangent_from_point",
    "upper_concave_envelope",
    "BUILTIN_REWARDS", "BoundaryLimits", "RewardSpec", "TransformedReward",
    "boundary_limits", "effective_reward", "lookback_reward",
    "power_sum_reward", "put_reward", "russian_reward", "transform",
    "Case", "ColumnSolution", "DiagonalSolution", "Region", "ValueSurface",
    "find_s_hat", "optimal_excursion_depth", "optimal_policy",
    "phase_diagram", "prop1_value", "prop2_objective", "smooth_fit_value",
    "solve_column", "v_diag", "v_surface",
    "DominanceReport", "MCConfig", "MCEstimate", "hitting_time_check",
    "policy_dominance_test", "simulate_policy",
    "ProblemConfig", "dump_config", "load_config", "loads_config",
]
