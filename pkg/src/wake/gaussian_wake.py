"""
Gaussian single-wake deficit and per-direction deficit tensors.

The deficit is the modified 2016 Bastankhah Gaussian wake with zero yaw and
zero deflection. Deficits depend only on geometry, turbine and wake
parameters, so they are computed once per grid and reused by every
objective evaluation.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.farm.farm_model import CandidateGrid, TurbineSpec, WindRose, rotate_to_wind_frame

logger = logging.getLogger(__name__)

# Expansion-rate fit against turbulence intensity
EXPANSION_SLOPE = 0.3837
EXPANSION_INTERCEPT = 0.003678

# Rotation round-off below this downwind distance does not make a site upstream
DOWNSTREAM_TOLERANCE = 1e-9  # m


class WakeModelError(ValueError):
    """Invalid wake model argument"""


def expansion_rates(turbulence_intensity: float) -> Tuple[float, float]:
    """Wake expansion rates (k_y, k_z); identical for the horizontal and vertical directions"""
    if not turbulence_intensity > 0:
        raise WakeModelError(f"turbulence_intensity must be > 0, got {turbulence_intensity}")
    k = EXPANSION_SLOPE * turbulence_intensity + EXPANSION_INTERCEPT
    return k, k


@dataclass(frozen=True)
class WakeParams:
    turbulence_intensity: float = 0.075
    yaw: float = 0.0
    deflection: float = 0.0

    def __post_init__(self):
        if not self.turbulence_intensity > 0:
            raise WakeModelError(f"turbulence_intensity must be > 0, got {self.turbulence_intensity}")
        if self.yaw != 0.0 or self.deflection != 0.0:
            raise WakeModelError("Only zero yaw and zero wake deflection are supported")

    @property
    def k_y(self) -> float:
        return expansion_rates(self.turbulence_intensity)[0]

    @property
    def k_z(self) -> float:
        return expansion_rates(self.turbulence_intensity)[1]


def wake_stddevs(dx, turbine: TurbineSpec, params: WakeParams):
    """
    Wake widths (sigma_y, sigma_z) at downstream distance dx.

    Accepts scalars or arrays; every dx must be >= 0.
    """
    dx_arr = np.asarray(dx, dtype=float)
    if np.any(dx_arr < 0) or np.any(np.isnan(dx_arr)):
        raise WakeModelError("Downstream distance must be >= 0; filter upstream pairs first")
    d = turbine.rotor_diameter
    sigma_y = params.k_y * dx_arr + d * math.cos(params.yaw) / math.sqrt(8.0)
    sigma_z = params.k_z * dx_arr + d / math.sqrt(8.0)
    if np.ndim(dx) == 0:
        return float(sigma_y), float(sigma_z)
    return sigma_y, sigma_z


def _deficit_unchecked(dx: np.ndarray, dy: np.ndarray, dz: np.ndarray, turbine: TurbineSpec, params: WakeParams) -> np.ndarray:
    d = turbine.rotor_diameter
    sigma_y = params.k_y * dx + d * math.cos(params.yaw) / math.sqrt(8.0)
    sigma_z = params.k_z * dx + d / math.sqrt(8.0)
    radicand = 1.0 - turbine.thrust_coefficient * math.cos(params.yaw) / (8.0 * sigma_y * sigma_z / d ** 2)
    # Near-wake guard: the far-wake formula is undefined where the radicand goes negative
    radicand = np.maximum(radicand, 0.0)
    centerline = 1.0 - np.sqrt(radicand)
    return centerline * np.exp(-0.5 * ((dy - params.deflection) / sigma_y) ** 2) * np.exp(-0.5 * (dz / sigma_z) ** 2)


def gaussian_deficit(dx, dy, dz, turbine: TurbineSpec, params: WakeParams):
    """
    Fractional velocity deficit dV/V_inf at a point (dx, dy, dz) relative to the
    wake-generating hub, with dx measured along the wind.

    dx must be strictly positive. Returns a value in [0, 1).
    """
    dx_arr = np.asarray(dx, dtype=float)
    if np.any(~(dx_arr > 0)):
        raise WakeModelError("gaussian_deficit needs dx > 0 (strictly downstream)")
    dy_arr = np.asarray(dy, dtype=float)
    dz_arr = np.asarray(dz, dtype=float)
    result = _deficit_unchecked(dx_arr, dy_arr, dz_arr, turbine, params)
    if np.ndim(result) == 0:
        return float(result)
    return result


@dataclass(frozen=True, eq=False)
class DeficitTensor:
    """
    deficits[i, j, k]: deficit at site j caused by a turbine at site k for direction bin i.

    Entries are zero unless k is strictly upstream of j in direction i.
    """
    deficits: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        deficits = np.asarray(self.deficits, dtype=float)
        if deficits.ndim != 3 or deficits.shape[1] != deficits.shape[2]:
            raise WakeModelError(f"Deficit tensor must have shape (bins, N, N), got {deficits.shape}")
        deficits.setflags(write=False)
        object.__setattr__(self, "deficits", deficits)
        object.__setattr__(self, "directions", np.asarray(self.directions, dtype=float))

    @property
    def n_bins(self) -> int:
        return int(self.deficits.shape[0])

    @property
    def n_sites(self) -> int:
        return int(self.deficits.shape[1])

    def upstream(self, direction_index: int, site: int) -> np.ndarray:
        """Indices S_j of the sites whose wakes reach `site` in the given bin"""
        return np.flatnonzero(self.deficits[direction_index, site] > 0)

    @cached_property
    def squared_deficits(self) -> np.ndarray:
        squared = self.deficits ** 2
        squared.setflags(write=False)
        return squared


def _direction_block(coords: np.ndarray, direction: float, turbine: TurbineSpec, params: WakeParams) -> np.ndarray:
    downwind, crosswind = rotate_to_wind_frame(coords, direction)
    # dx[j, k] > 0 when k is upstream of j
    dx = downwind[:, None] - downwind[None, :]
    dy = crosswind[:, None] - crosswind[None, :]
    block = np.zeros_like(dx)
    waked = dx > DOWNSTREAM_TOLERANCE
    if np.any(waked):
        block[waked] = _deficit_unchecked(dx[waked], dy[waked], np.zeros(int(waked.sum())), turbine, params)
    return block


def precompute_deficit_tensor(
    grid: CandidateGrid,
    rose: WindRose,
    turbine: TurbineSpec,
    params: WakeParams,
    workers: int = 1,
    progress: bool = False,
) -> DeficitTensor:
    """
    Evaluate the single-wake deficit for every ordered pair of sites and every
    direction bin. Bins are independent and may be computed on a thread pool;
    the result is merged in bin order.
    """
    coords = grid.coordinates
    directions = list(rose.directions)
    logger.info(f"Precomputing deficits: {grid.n_sites} sites x {len(directions)} directions")

    def compute(direction: float) -> np.ndarray:
        return _direction_block(coords, direction, turbine, params)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(tqdm(pool.map(compute, directions), total=len(directions),
                               desc="Deficits", disable=not progress))
    else:
        blocks = [compute(d) for d in tqdm(directions, desc="Deficits", disable=not progress)]

    tensor = DeficitTensor(deficits=np.stack(blocks), directions=rose.directions)
    logger.debug(f"Deficit tensor: {int((tensor.deficits > 0).sum())} nonzero entries")
    return tensor


def dump_deficit_tensor(tensor: DeficitTensor, directory: Union[str, Path]) -> List[Path]:
    """Write one N x N CSV per direction bin for inspection"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, direction in enumerate(tensor.directions):
        path = directory / f"deficit_dir_{i:02d}_{int(round(direction)):03d}.csv"
        pd.DataFrame(tensor.deficits[i]).to_csv(path, index=False, header=False, float_format="%.12e")
        paths.append(path)
    logger.info(f"💾 Deficit tensor dumped to {directory} ({len(paths)} files)")
    return paths
