"""
Rounding of continuous designs to binary layouts with greedy feasibility repair.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.constraints.layout_constraints import ConstraintSystem

logger = logging.getLogger(__name__)


@dataclass
class RoundingResult:
    selected: np.ndarray
    repair_needed: bool
    feasible: bool
    flips: int


def violation(selected: np.ndarray, constraints: ConstraintSystem) -> float:
    """
    Total binary violation in turbine units: count shortfall, count excess and
    x^T A x over the neighbor adjacency A (each crowded pair counts twice).
    """
    x = np.asarray(selected, dtype=float)
    count = x.sum()
    crowding = float(x @ (constraints.adjacency @ x))
    return max(0.0, constraints.n_min - count) + max(0.0, count - constraints.n_max) + crowding


def _violation_after_each_flip(x: np.ndarray, constraints: ConstraintSystem) -> np.ndarray:
    count = x.sum()
    crowded = constraints.adjacency @ x
    sign = 1.0 - 2.0 * x  # +1 switches a site on, -1 switches it off
    new_count = count + sign
    spacing = float(x @ crowded) + sign * 2.0 * crowded
    return (np.maximum(0.0, constraints.n_min - new_count)
            + np.maximum(0.0, new_count - constraints.n_max)
            + spacing)


def round_design(rho, constraints: ConstraintSystem, threshold: float = 0.5) -> RoundingResult:
    """
    Threshold rho (>= threshold -> 1), then flip, one bit at a time, whichever
    site most reduces the total violation (ties to the lowest index) until the
    layout is feasible. Gives up after N flips or when no flip helps.
    """
    rho = np.asarray(getattr(rho, "rho", rho), dtype=float)
    x = (rho >= threshold).astype(float)
    current = violation(x, constraints)
    repair_needed = current > 0
    flips = 0

    while current > 0 and flips < constraints.n_sites:
        candidates = _violation_after_each_flip(x, constraints)
        best = int(np.argmin(candidates))
        if not candidates[best] < current:
            break
        x[best] = 1.0 - x[best]
        current = float(candidates[best])
        flips += 1

    feasible = current == 0
    if repair_needed:
        if feasible:
            logger.info(f"⚠️ Rounded layout repaired with {flips} flips")
        else:
            logger.warning(f"❌ Rounding repair stopped after {flips} flips with violation {current:g}")
    return RoundingResult(selected=x.astype(int), repair_needed=repair_needed, feasible=feasible, flips=flips)
