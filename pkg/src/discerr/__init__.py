"""Discretization error of stochastic integrals along adapted time-nets.

Exact simulation of the Riemann-sum hedging error for Brownian and
geometric Brownian models, fractional-smoothness diagnostics of the
payoff, the weak-limit objects, and Monte Carlo estimators on top.
"""

from .errors import (AccuracyError, ClampError, DataError, DiscerrError, DomainError,
                     GridMismatchError, InvalidArgumentError, InvalidGridError, PrecisionError)
from .rng import RngStream
from .model import Grid, Model, PathSample, graded_grid, refine_path, sample_path
from .timenet import MeshStats, TimeNet, build_net, mesh_stats
from .payoff import (DEFAULT_CFG, GEvalConfig, Payoff, apply_A, eval_dG, eval_G,
                     pde_residual, state_expectation)
from .discretize import (Decomposition, ErrorSample, decompose_error, error_at, error_path,
                         error_second_moment, tail_sup_error, terminal_error)
from .smoothness import (HermiteExpansion, SmoothnessReport, besov_norm, check_conditions,
                         fractional_D, gaussian_pair_moment, h_curve, hermite_coeffs, osc)
from .weaklimit import Clock, LimitSample, bracket_psi, clock, clock_mean, nu_beta, sample_Z
from .estimators import (MomentEstimate, RateFit, TailFit, ks_distance, lp_moment, rate_fit,
                         shortfall_capital, singularity_exponent, tail_fit)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ClampError",
    "DataError",
    "DiscerrError",
    "DomainError",
    "GridMismatchError",
    "InvalidArgumentError",
    "InvalidGridError",
    "PrecisionError",
    "RngStream",
    "Grid",
    "Model",
    "PathSample",
    "graded_grid",
    "refine_path",
    "sample_path",
    "MeshStats",
    "TimeNet",
    "build_net",
    "mesh_stats",
    "DEFAULT_CFG",
    "GEvalConfig",
    "Payoff",
    "apply_A",
    "eval_dG",
    "eval_G",
    "pde_residual",
    "state_expectation",
    "Decomposition",
    "ErrorSample",
    "decompose_error",
    "error_at",
    "error_path",
    "error_second_moment",
    "tail_sup_error",
    "terminal_error",
    "HermiteExpansion",
    "SmoothnessReport",
    "besov_norm",
    "check_conditions",
    "fractional_D",
    "gaussian_pair_moment",
    "h_curve",
    "hermite_coeffs",
    "osc",
    "Clock",
    "LimitSample",
    "bracket_psi",
    "clock",
    "clock_mean",
    "nu_beta",
    "sample_Z",
    "MomentEstimate",
    "RateFit",
    "TailFit",
    "ks_distance",
    "lp_moment",
    "rate_fit",
    "shortfall_capital",
    "singularity_exponent",
    "tail_fit",
]
