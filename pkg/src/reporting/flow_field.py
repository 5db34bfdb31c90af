"""
Effective wind speed sampled on a regular raster over the farm.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from src.farm.farm_model import CandidateGrid, TurbineSpec, rotate_to_wind_frame
from src.wake.gaussian_wake import DOWNSTREAM_TOLERANCE, WakeParams, gaussian_deficit

logger = logging.getLogger(__name__)


@dataclass
class FlowField:
    xs: np.ndarray
    ys: np.ndarray
    speeds: np.ndarray  # (len(ys), len(xs))
    direction: float
    free_stream: float

    def to_frame(self) -> pd.DataFrame:
        xx, yy = np.meshgrid(self.xs, self.ys)
        return pd.DataFrame({"x": xx.ravel(), "y": yy.ravel(), "speed_ms": self.speeds.ravel()})


def point_speeds(points: np.ndarray, sources: np.ndarray, direction: float, free_stream: float,
                 turbine: TurbineSpec, params: WakeParams) -> np.ndarray:
    """Root-sum-square wake loss at arbitrary points from the given wake sources"""
    loss_sq = np.zeros(points.shape[0])
    if sources.shape[0]:
        p_down, p_cross = rotate_to_wind_frame(points, direction)
        s_down, s_cross = rotate_to_wind_frame(sources, direction)
        dx = p_down[:, None] - s_down[None, :]
        dy = p_cross[:, None] - s_cross[None, :]
        waked = dx > DOWNSTREAM_TOLERANCE
        if np.any(waked):
            deficits = np.zeros_like(dx)
            deficits[waked] = gaussian_deficit(dx[waked], dy[waked], np.zeros(int(waked.sum())), turbine, params)
            loss_sq = np.sum(deficits ** 2, axis=1)
    return free_stream * (1.0 - np.minimum(np.sqrt(loss_sq), 1.0))


def evaluate_flow_field(
    grid: CandidateGrid,
    selected,
    turbine: TurbineSpec,
    params: WakeParams,
    direction: float = 270.0,
    free_stream: float = 9.8,
    resolution: Optional[float] = None,
) -> FlowField:
    """
    Sample V_e over the bounding box of the farm boundary with the selected
    turbines as wake sources. Default resolution is D/4. The box is at least
    two rotor diameters wide, so a single-site farm still gets a raster.
    """
    resolution = turbine.rotor_diameter / 4.0 if resolution is None else float(resolution)
    half_width = max(grid.boundary_radius, turbine.rotor_diameter)
    extent = 2.0 * half_width
    if not resolution > 0:
        raise ValueError(f"Flow-field resolution must be > 0, got {resolution}")
    if resolution > extent:
        raise ValueError(f"Flow-field resolution {resolution} m exceeds the farm extent {extent} m")

    mask = np.asarray(selected).astype(bool)
    sources = grid.coordinates[mask]
    axis = np.arange(-half_width, half_width + 0.5 * resolution, resolution)
    xx, yy = np.meshgrid(axis, axis)
    speeds = point_speeds(np.column_stack([xx.ravel(), yy.ravel()]), sources, direction, free_stream, turbine, params)
    logger.debug(f"Flow field: {axis.size}x{axis.size} raster, {sources.shape[0]} turbines, {direction} deg")
    return FlowField(xs=axis, ys=axis.copy(), speeds=speeds.reshape(xx.shape), direction=float(direction),
                     free_stream=float(free_stream))
