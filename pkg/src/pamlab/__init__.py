"""Variational constants and Monte Carlo tools for the parabolic Anderson model with time-dependent diffusion."""

__version__ = "0.1.0"

from .cumulant import CumulantModel, bernoulli_pm, double_exp, parse_model, power_tail, table_based
from .lattice import Boundary, LatticeMeasure, dirichlet_form
from .discrete import DiscreteProblem, Kind, SolverOptions, brute_force_oracle, solve
from .scales import DiffusionFunction, PhaseReport, classify_phase, predicted_log_moment, solve_alpha
from .feynman_kac import (
    QuenchedField,
    annealed_moment_mc,
    few_jumps_oracle,
    quenched_solve,
    sample_local_times,
)

__all__ = [
    "__version__",
    "CumulantModel",
    "bernoulli_pm",
    "double_exp",
    "parse_model",
    "power_tail",
    "table_based",
    "Boundary",
    "LatticeMeasure",
    "dirichlet_form",
    "DiscreteProblem",
    "Kind",
    "SolverOptions",
    "brute_force_oracle",
    "solve",
    "DiffusionFunction",
    "PhaseReport",
    "classify_phase",
    "predicted_log_moment",
    "solve_alpha",
    "QuenchedField",
    "annealed_moment_mc",
    "few_jumps_oracle",
    "quenched_solve",
    "sample_local_times",
]
