"""
Layout solvers: MMA with continuation, genetic algorithm, brute force
"""

from .brute_force import brute_force_solve
from .genetic_optimizer import ga_solve
from .mma_optimizer import mma_solve
from .problem import LayoutProblem
from .results import GaSettings, MmaSettings, SolveResult, SolverError
from .rounding import round_design

__all__ = [
    "GaSettings",
    "LayoutProblem",
    "MmaSettings",
    "SolveResult",
    "SolverError",
    "brute_force_solve",
    "ga_solve",
    "mma_solve",
    "round_design",
]
