"""
Exhaustive enumeration of every binary layout; exact reference for small grids.
"""

import logging
import math
import time

import numpy as np
from tqdm import tqdm

from src.solvers.genetic_optimizer import feasible_mask
from src.solvers.problem import LayoutProblem
from src.solvers.results import IterationRecord, SolveResult, SolverError, Termination

logger = logging.getLogger(__name__)

MAX_BRUTE_FORCE_SITES = 20
CHUNK_SIZE = 4096
# AEP values this close (relative) to the maximum count as ties
TIE_TOLERANCE = 1e-12


def enumerate_layouts(n_sites: int, start: int, stop: int) -> np.ndarray:
    """Rows for the integers start..stop-1; bit i of the integer is site i"""
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n_sites, dtype=np.int64)) & 1).astype(float)


def _site_order_keys(codes: np.ndarray, n_sites: int) -> np.ndarray:
    """
    Codes with the bit order reversed, so site 0 is the most significant bit.

    The largest key wins a tie: at the first site where two tied layouts
    differ, the one with a turbine there is preferred.
    """
    bits = (codes[:, None] >> np.arange(n_sites, dtype=np.int64)) & 1
    return bits @ (np.int64(1) << np.arange(n_sites - 1, -1, -1, dtype=np.int64))


def brute_force_solve(problem: LayoutProblem, max_sites: int = MAX_BRUTE_FORCE_SITES, progress: bool = False) -> SolveResult:
    n = problem.n_sites
    limit = min(max_sites, MAX_BRUTE_FORCE_SITES)
    if n > limit:
        raise SolverError(f"Brute force refuses {n} sites (limit {limit})", iteration_dump={"n_sites": n})

    start = time.perf_counter()
    total = 1 << n
    values = np.full(total, -np.inf)
    evaluations = 0
    for lo in tqdm(range(0, total, CHUNK_SIZE), desc="Brute force", disable=not progress):
        hi = min(lo + CHUNK_SIZE, total)
        layouts = enumerate_layouts(n, lo, hi)
        feasible = feasible_mask(layouts, problem)
        if np.any(feasible):
            chunk = np.full(hi - lo, -np.inf)
            chunk[feasible] = problem.binary_aep_batch(layouts[feasible])
            values[lo:hi] = chunk
            evaluations += int(feasible.sum())
    elapsed = time.perf_counter() - start

    if not np.any(np.isfinite(values)):
        logger.warning("❌ No feasible layout exists")
        return SolveResult(
            solver="brute", rho=np.zeros(n), selected=np.zeros(n, dtype=int), aep_gwh=math.nan,
            iterations=1, evaluations=evaluations, termination=Termination.INFEASIBLE,
            wall_seconds=elapsed, feasible=False,
            history=[IterationRecord(iteration=1, q=math.nan, aep_gwh=math.nan, max_violation=math.inf, step_norm=math.nan)],
        )

    best_value = values.max()
    tied = np.flatnonzero(values >= best_value - TIE_TOLERANCE * abs(best_value))
    best_code = int(tied[np.argmax(_site_order_keys(tied, n))])
    selected = enumerate_layouts(n, best_code, best_code + 1)[0]
    logger.info(f"Brute force: {evaluations} feasible layouts, optimum {best_value:.6f} GWh "
                f"with {int(selected.sum())} turbines")
    return SolveResult(
        solver="brute",
        rho=selected.copy(),
        selected=selected.astype(int),
        aep_gwh=float(values[best_code]),
        iterations=1,
        evaluations=evaluations,
        termination=Termination.EXHAUSTIVE,
        wall_seconds=elapsed,
        feasible=True,
        history=[IterationRecord(iteration=1, q=math.nan, aep_gwh=float(values[best_code]),
                                 max_violation=0.0, step_norm=math.nan)],
    )
