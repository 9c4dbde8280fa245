"""Configuration, oracles, experiment runners and the command-line interface."""

from __future__ import annotations

from .convergence import ConvergenceResult, ConvergenceRow, convergence_study
from .oracles import glued_line_oracle, hopf_lax_oracle, reference_solution
from .problems import Config, ConfigError, ProblemSpec, build_problem, load_config, parse_config

__all__ = [
    "Config",
    "ConfigError",
    "ConvergenceResult",
    "ConvergenceRow",
    "ProblemSpec",
    "build_problem",
    "convergence_study",
    "glued_line_oracle",
    "hopf_lax_oracle",
    "load_config",
    "parse_config",
    "reference_solution",
]
