from .bigm import BigMBounds, compute_big_m
from .bnb import BnbOptions, MipSolution, MipStatus, complete_solution, solve_branch_and_bound
from .cuts import CriticalCut, is_critical, separate_critical_cuts
from .instance import (
    FilterInstance,
    FilterSolution,
    InfeasibleError,
    SolverError,
    evaluate_filtered_moments,
    make_solution,
)
from .model import MiqpModel, build_miqp
from .oracle import brute_force_oracle

__all__ = [
    "BigMBounds", "BnbOptions", "CriticalCut", "FilterInstance", "FilterSolution",
    "InfeasibleError", "MipSolution", "MipStatus", "MiqpModel", "SolverError",
    "brute_force_oracle", "build_miqp", "complete_solution", "compute_big_m",
    "evaluate_filtered_moments", "is_critical", "make_solution", "separate_critical_cuts",
    "solve_branch_and_bound",
]
