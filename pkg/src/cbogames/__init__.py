"""Consensus-based optimization for Nash equilibria of M-player games."""

from .config import ConfigError, RunConfig, parse_config
from .consensus import (ConsensusSet, as_ensemble, consensus_all, consensus_for_player,
                        softmin_weights, weighted_point)
from .dynamics import (BlowUpError, CboParams, GaussianInit, PointInit, Trajectory, UniformInit,
                       simulate, simulate_coupled, step_em)
from .games import (BUILTIN_GAMES, EvaluationError, GameError, GameSpec, GrowthMeta,
                    builtin_game, eval_cost, nash_residual)
from .metrics import (FitResult, fit_exponential_decay, fit_power_law, gamma_exponent,
                      moment_trace, variance_trace, wasserstein_p)
from .noise import NoiseStream, philox4x32
from .report import ExperimentReport, Verdict

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_GAMES", "BlowUpError", "CboParams", "ConfigError", "ConsensusSet",
    "EvaluationError", "ExperimentReport", "FitResult", "GameError", "GameSpec",
    "GaussianInit", "GrowthMeta", "NoiseStream", "PointInit", "RunConfig", "Trajectory",
    "UniformInit", "Verdict", "as_ensemble", "builtin_game", "consensus_all",
    "consensus_for_player", "eval_cost", "fit_exponential_decay", "fit_power_law",
    "gamma_exponent", "moment_trace", "nash_residual", "parse_config", "philox4x32",
    "simulate", "simulate_coupled", "softmin_weights", "step_em", "variance_trace",
    "wasserstein_p", "weighted_point",
]
