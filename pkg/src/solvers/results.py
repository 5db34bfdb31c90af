"""
Solver settings and results shared by MMA, the genetic algorithm and brute force.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


class SolverError(RuntimeError):
    """Solver failure; iteration_dump holds the state at the point of failure"""

    def __init__(self, message: str, iteration_dump: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.iteration_dump = iteration_dump or {}


class Termination:
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    STALL = "stall"
    MAX_GENERATIONS = "max_generations"
    EXHAUSTIVE = "exhaustive"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class MmaSettings:
    """
    MMA with RAMP/SIMP continuation and moving limits.

    The asymptote and subproblem constants are the usual published MMA
    defaults: asyinit 0.5, asyincr 1.2, asydecr 0.7, albefa 0.1, raa0 1e-5,
    c = 1000, d = 1, a0 = 1, a = 0.
    """
    q_min: float = 0.0
    q_step: float = 0.5
    q_step_interval: int = 10
    q_max: float = 10.0
    move_limit: float = 0.1
    max_iterations: int = 1000
    step_tolerance: float = 1e-8
    q_floor: float = 3.0
    initial_density: float = 0.2
    fixed_q: Optional[float] = None
    asyinit: float = 0.5
    asyincr: float = 1.2
    asydecr: float = 0.7
    albefa: float = 0.1
    raa0: float = 1e-5
    c: float = 1000.0
    d: float = 1.0
    subproblem_tolerance: float = 1e-9

    def __post_init__(self):
        errors = []
        if self.fixed_q is None and not self.q_min <= self.q_floor <= self.q_max:
            errors.append("q_min <= q_floor <= q_max")
        if not self.q_step > 0:
            errors.append("q_step > 0")
        if self.q_step_interval < 1:
            errors.append("q_step_interval >= 1")
        if not 0 < self.move_limit <= 1:
            errors.append("0 < move_limit <= 1")
        if self.max_iterations < 1:
            errors.append("max_iterations >= 1")
        if not self.step_tolerance > 0:
            errors.append("step_tolerance > 0")
        if not 0 <= self.initial_density <= 1:
            errors.append("0 <= initial_density <= 1")
        if self.fixed_q is not None and self.fixed_q < 0:
            errors.append("fixed_q >= 0")
        if errors:
            raise ValueError("Invalid MMA settings: " + ", ".join(errors))

    def penalty_at(self, iteration: int) -> float:
        """Continuation schedule, iterations counted from 1"""
        if self.fixed_q is not None:
            return self.fixed_q
        steps = (iteration - 1) // self.q_step_interval
        return min(self.q_max, self.q_min + self.q_step * steps)

    def continuation_done(self, q: float) -> bool:
        if self.fixed_q is not None:
            return True
        return q >= self.q_floor - 1e-12

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MmaSettings":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown MMA settings: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class GaSettings:
    """
    Generational GA over bitstrings. Operators: tournament selection (k = 2),
    uniform crossover, bit-flip mutation with rate 1/N unless given,
    elitism of one individual.
    """
    population_size: int = 5000
    max_generations: int = 1000
    stall_generations: int = 100
    function_tolerance: float = 1e-8
    seed: int = 0
    crossover_rate: float = 0.8
    mutation_rate: Optional[float] = None
    tournament_size: int = 2
    elite_count: int = 1

    def __post_init__(self):
        errors = []
        if self.population_size < 2:
            errors.append("population_size >= 2")
        if self.max_generations < 1:
            errors.append("max_generations >= 1")
        if self.stall_generations < 1:
            errors.append("stall_generations >= 1")
        if not 0 <= self.crossover_rate <= 1:
            errors.append("0 <= crossover_rate <= 1")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            errors.append("0 <= mutation_rate <= 1")
        if not 1 <= self.tournament_size <= self.population_size:
            errors.append("1 <= tournament_size <= population_size")
        if not 0 <= self.elite_count < self.population_size:
            errors.append("0 <= elite_count < population_size")
        if errors:
            raise ValueError("Invalid GA settings: " + ", ".join(errors))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GaSettings":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown GA settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class IterationRecord:
    iteration: int
    q: float
    aep_gwh: float
    max_violation: float
    step_norm: float


@dataclass
class SolveResult:
    solver: str
    rho: np.ndarray
    selected: np.ndarray
    aep_gwh: float
    iterations: int
    evaluations: int
    termination: str
    wall_seconds: float
    feasible: bool = True
    repair_needed: bool = False
    aep_continuous_gwh: float = math.nan
    final_q: float = math.nan
    history: List[IterationRecord] = field(default_factory=list)
    iterates: List[np.ndarray] = field(default_factory=list)

    @property
    def turbine_count(self) -> int:
        return int(np.asarray(self.selected).sum())

    @property
    def aep_history(self) -> List[float]:
        return [record.aep_gwh for record in self.history]

    def summary(self) -> Dict[str, Any]:
        """JSON-ready scalar summary"""
        return {
            "aep_gwh": float(self.aep_gwh) if math.isfinite(self.aep_gwh) else None,
            "turbine_count": self.turbine_count,
            "iterations": int(self.iterations),
            "evaluations": int(self.evaluations),
            "termination": self.termination,
            "wall_seconds": round(float(self.wall_seconds), 3),
            "solver": self.solver,
            "feasible": bool(self.feasible),
            "repair_needed": bool(self.repair_needed),
            "aep_continuous_gwh": float(self.aep_continuous_gwh) if math.isfinite(self.aep_continuous_gwh) else None,
            "final_q": float(self.final_q) if math.isfinite(self.final_q) else None,
        }

    def history_records(self) -> List[Dict[str, Any]]:
        return [asdict(record) for record in self.history]
