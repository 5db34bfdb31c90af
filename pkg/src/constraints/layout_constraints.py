"""
Volume and spacing constraints of the layout problem.

All constraints are affine in the densities, so their Jacobians are built once
and stay constant for the whole solve. Ordering of the stacked constraint
vector: [g_minV, g_maxV, spacing rows...].
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.spatial import cKDTree

from src.farm.farm_model import CandidateGrid, TurbineSpec

logger = logging.getLogger(__name__)


class ConstraintError(ValueError):
    """Inconsistent constraint inputs"""


def build_spacing(grid: CandidateGrid, turbine: TurbineSpec, factor: float = 2.0) -> Tuple[List[np.ndarray], sparse.csr_matrix]:
    """
    Neighbor sets N_i = {j != i : dist(i, j) <= factor * D} and the spacing
    matrix H with one row per ordered neighbor pair (i, j): rho_i + rho_j <= 1.
    """
    if not factor > 0:
        raise ConstraintError(f"Spacing factor must be > 0, got {factor}")
    min_distance = factor * turbine.rotor_diameter
    n = grid.n_sites

    pairs = _unordered_pairs(grid.coordinates, min_distance)
    ordered = np.vstack([pairs, pairs[:, ::-1]]) if pairs.size else np.empty((0, 2), dtype=int)
    # row order: sorted by (i, j)
    ordered = ordered[np.lexsort((ordered[:, 1], ordered[:, 0]))]

    neighbors = [ordered[ordered[:, 0] == i, 1] for i in range(n)]

    m = ordered.shape[0]
    rows = np.repeat(np.arange(m), 2)
    cols = ordered.reshape(-1)
    H = sparse.coo_matrix((np.ones(2 * m), (rows, cols)), shape=(m, n)).tocsr()
    logger.debug(f"Spacing: {pairs.shape[0]} neighbor pairs within {min_distance:.1f} m")
    return neighbors, H


def _unordered_pairs(coords: np.ndarray, radius: float) -> np.ndarray:
    if coords.shape[0] < 2:
        return np.empty((0, 2), dtype=int)
    tree = cKDTree(coords)
    pairs = tree.query_pairs(radius * (1.0 + 1e-12), output_type="ndarray")
    if pairs.size == 0:
        return np.empty((0, 2), dtype=int)
    # exact inclusive check against the unpadded radius
    dist = np.linalg.norm(coords[pairs[:, 0]] - coords[pairs[:, 1]], axis=1)
    pairs = pairs[dist <= radius]
    return np.sort(pairs, axis=1)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """
    Volume fractions V*_min = N_min / N, V*_max = N_max / N and the spacing
    matrix H (M x N, two unit entries per row, both orderings of every pair).
    """
    n_sites: int
    n_min: int
    n_max: int
    min_distance: float
    neighbors: Tuple[np.ndarray, ...]
    H: sparse.csr_matrix

    def __post_init__(self):
        if not 0 <= self.n_min <= self.n_max <= self.n_sites:
            raise ConstraintError(
                f"Need 0 <= N_min <= N_max <= N, got N_min={self.n_min}, N_max={self.n_max}, N={self.n_sites}")
        if self.H.shape[1] != self.n_sites:
            raise ConstraintError("Spacing matrix column count differs from the number of sites")

    @property
    def v_min(self) -> float:
        return self.n_min / self.n_sites

    @property
    def v_max(self) -> float:
        return self.n_max / self.n_sites

    @property
    def n_spacing(self) -> int:
        return int(self.H.shape[0])

    @property
    def n_constraints(self) -> int:
        return 2 + self.n_spacing

    @cached_property
    def pairs(self) -> np.ndarray:
        """Unordered neighbor pairs (i < j)"""
        rows = [(i, j) for i, nbrs in enumerate(self.neighbors) for j in nbrs if i < j]
        return np.array(rows, dtype=int).reshape(-1, 2)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 neighbor matrix"""
        pairs = self.pairs
        data = np.ones(2 * pairs.shape[0])
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        return sparse.coo_matrix((data, (rows, cols)), shape=(self.n_sites, self.n_sites)).tocsr()

    def values(self, rho) -> np.ndarray:
        """Stacked constraint values; feasible where every entry is <= 0"""
        rho = _check_rho(rho, self.n_sites)
        g_min, g_max = volume_constraints(rho, self.n_min, self.n_max)[:2]
        return np.concatenate([[g_min, g_max], spacing_values(rho, self)])

    def jacobian(self) -> sparse.csr_matrix:
        volume = np.vstack([np.full(self.n_sites, -1.0 / self.n_sites), np.full(self.n_sites, 1.0 / self.n_sites)])
        return sparse.vstack([sparse.csr_matrix(volume), self.H]).tocsr()

    def max_violation(self, rho) -> float:
        return float(max(0.0, np.max(self.values(rho))))

    def is_feasible(self, selected) -> bool:
        """Binary feasibility: count within bounds and no two selected neighbors"""
        x = np.asarray(selected, dtype=float)
        count = x.sum()
        if count < self.n_min or count > self.n_max:
            return False
        return float(x @ (self.adjacency @ x)) == 0.0


def _check_rho(rho, n_sites: int) -> np.ndarray:
    rho = np.asarray(getattr(rho, "rho", rho), dtype=float)
    if rho.shape != (n_sites,):
        raise ConstraintError(f"Design vector has shape {rho.shape}, expected ({n_sites},)")
    return rho


def build_constraint_system(
    grid: CandidateGrid,
    turbine: TurbineSpec,
    n_min: int,
    n_max: int,
    factor: float = 2.0,
) -> ConstraintSystem:
    if n_min > n_max:
        raise ConstraintError(f"N_min ({n_min}) > N_max ({n_max})")
    neighbors, H = build_spacing(grid, turbine, factor)
    system = ConstraintSystem(
        n_sites=grid.n_sites,
        n_min=int(n_min),
        n_max=int(n_max),
        min_distance=factor * turbine.rotor_diameter,
        neighbors=tuple(neighbors),
        H=H,
    )
    logger.info(f"📊 Constraints: N_min={n_min}, N_max={n_max}, {system.n_spacing} spacing rows")
    return system


def volume_constraints(rho, n_min: int, n_max: int):
    """
    (g_minV, g_maxV, grad_min, grad_max) with
    g_minV = -(sum rho)/N + N_min/N and g_maxV = (sum rho)/N - N_max/N.
    """
    rho = np.asarray(getattr(rho, "rho", rho), dtype=float)
    n = rho.size
    if n_min > n_max:
        raise ConstraintError(f"N_min ({n_min}) > N_max ({n_max})")
    if n_min < 0 or n_max > n:
        raise ConstraintError(f"Volume bounds must satisfy 0 <= N_min <= N_max <= {n}")
    total = rho.sum() / n
    g_min = -total + n_min / n
    g_max = total - n_max / n
    return g_min, g_max, np.full(n, -1.0 / n), np.full(n, 1.0 / n)


def spacing_values(rho, system: ConstraintSystem) -> np.ndarray:
    """H rho - 1; the Jacobian is H"""
    rho = _check_rho(rho, system.n_sites)
    return system.H @ rho - 1.0


def dump_neighbor_pairs(system: ConstraintSystem, grid: CandidateGrid, path: Union[str, Path]) -> Path:
    """neighbors.csv with columns i, j, distance_m (unordered pairs)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pairs = system.pairs
    coords = grid.coordinates
    distance = np.linalg.norm(coords[pairs[:, 0]] - coords[pairs[:, 1]], axis=1) if pairs.size else np.empty(0)
    pd.DataFrame({"i": pairs[:, 0], "j": pairs[:, 1], "distance_m": distance}).to_csv(path, index=False)
    logger.info(f"💾 Neighbor pairs saved to {path}")
    return path
