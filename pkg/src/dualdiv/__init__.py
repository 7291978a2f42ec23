"""Optimal hybrid continuous/periodic dividend barriers for the dual Levy model."""

from .errors import ConfigError, NumericError, RegimeError
from .expsum import ExpSum
from .levy import LevyModel, PhaseTypeJump
from .optimizer import HybridSolution, a_of_b, epsilon_root, solve, sweep
from .scale import ScaleEngine, build_engine
from .sim import ExitOracle, SimConfig, SimEstimate, estimate_value, exit_oracle
from .valuation import (Gamma, ProblemParams, Regime, ValueFunction, f_c, f_p,
                        gamma_small, hybrid_value, kappa_fn, m_fn, v_continuous,
                        v_hybrid, v_periodic)
from .verify import HjbReport, apply_generator, hjb_scan

__all__ = [
    "ConfigError", "NumericError", "RegimeError", "ExpSum", "LevyModel",
    "PhaseTypeJump", "HybridSolution", "a_of_b", "epsilon_root", "solve",
    "sweep", "ScaleEngine", "build_engine", "ExitOracle", "SimConfig",
    "SimEstimate", "estimate_value", "exit_oracle", "Gamma", "ProblemParams",
    "Regime", "ValueFunction", "f_c", "f_p", "gamma_small", "hybrid_value",
    "kappa_fn", "m_fn", "v_continuous", "v_hybrid", "v_periodic", "HjbReport",
    "apply_generator", "hjb_scan",
]
