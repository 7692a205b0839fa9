"""Optimal two-sided control bands for a cash reserve under drift ambiguity."""

from .model import ABM, OU, DriftSign, ModelParams, feasibility_check
from .solver import BandSolution, SolverConfig, SolverError, solve_band, solve_classical
from .verifier import verify, worst_case_generator
from .simulator import SimConfig, SimEstimate, simulate_cost, simulate_path

__all__ = [
    "ABM",
    "OU",
    "DriftSign",
    "ModelParams",
    "feasibility_check",
    "BandSolution",
    "SolverConfig",
    "SolverError",
    "solve_band",
    "solve_classical",
    "verify",
    "worst_case_generator",
    "SimConfig",
    "SimEstimate",
    "simulate_cost",
    "simulate_path",
]
