"""
Farm model: turbines, candidate grids and wind roses.

Geometry conventions used across the project:
- x points east, y points north, both in meters.
- Wind directions are meteorological: the direction the wind comes FROM,
  clockwise from north. 270 deg (westerly) blows toward +x.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

logger = logging.getLogger(__name__)

# Frequencies within this distance of 1 are renormalized on load
ROSE_SUM_TOLERANCE = 1e-6


class FarmModelError(ValueError):
    """Invalid turbine, grid or wind rose definition"""


class GridMode(str, Enum):
    CENTERED = "centered"
    OFFSET = "offset"
    EXTERNAL = "external"


@dataclass(frozen=True)
class TurbineSpec:
    """
    Turbine data needed by the wake model and the power curve.

    hub_height does not enter any computation while all turbines share it
    (the vertical offset z - z_h is always zero).
    """
    rotor_diameter: float = 130.0
    hub_height: float = 110.0
    rated_power: float = 3.37  # MW
    cut_in_speed: float = 4.0
    rated_speed: float = 9.8
    cut_out_speed: float = 25.0
    thrust_coefficient: float = 8.0 / 9.0

    def __post_init__(self):
        if self.rotor_diameter <= 0:
            raise FarmModelError(f"rotor_diameter must be > 0, got {self.rotor_diameter}")
        if self.rated_power <= 0:
            raise FarmModelError(f"rated_power must be > 0, got {self.rated_power}")
        if not 0 < self.cut_in_speed < self.rated_speed < self.cut_out_speed:
            raise FarmModelError(
                "power curve needs 0 < cut_in < rated < cut_out, got "
                f"{self.cut_in_speed}, {self.rated_speed}, {self.cut_out_speed}"
            )
        if not 0 < self.thrust_coefficient < 1:
            raise FarmModelError(f"thrust_coefficient must be in (0, 1), got {self.thrust_coefficient}")

    @classmethod
    def from_dict(cls, data: dict) -> "TurbineSpec":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise FarmModelError(f"Unknown turbine fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in known.items()})


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Candidate turbine sites inside a circular farm boundary"""
    x: np.ndarray
    y: np.ndarray
    boundary_radius: float
    grid_spacing: float
    grid_mode: GridMode

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise FarmModelError("Grid coordinates must be 1-D arrays of equal length")
        if x.size == 0:
            raise FarmModelError("Grid is empty: at least one candidate site is required")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise FarmModelError("Grid coordinates must be finite")
        r2 = self.boundary_radius * self.boundary_radius
        outside = np.flatnonzero(x * x + y * y > r2 * (1.0 + 1e-12))
        if outside.size:
            raise FarmModelError(
                f"{outside.size} site(s) lie outside the boundary radius {self.boundary_radius} m "
                f"(first index {outside[0]})"
            )
        duplicates = _duplicate_rows(x, y)
        if duplicates:
            raise FarmModelError(f"Duplicate grid points: {duplicates[:5]}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "grid_mode", GridMode(self.grid_mode))

    @property
    def n_sites(self) -> int:
        return int(self.x.size)

    @property
    def coordinates(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "y": self.y})


@dataclass(frozen=True, eq=False)
class WindRose:
    """Discrete wind rose: one (direction, frequency, free-stream speed) triple per bin"""
    directions: np.ndarray
    frequencies: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        directions = np.array(self.directions, dtype=float)
        frequencies = np.array(self.frequencies, dtype=float)
        speeds = np.array(self.speeds, dtype=float)
        if not (directions.shape == frequencies.shape == speeds.shape) or directions.ndim != 1:
            raise FarmModelError("Wind rose columns must be 1-D and of equal length")
        if directions.size == 0:
            raise FarmModelError("Wind rose has no bins")
        if np.any(frequencies < 0):
            raise FarmModelError("Wind rose frequencies must be non-negative")
        if abs(frequencies.sum() - 1.0) > 1e-9:
            raise FarmModelError(f"Wind rose frequencies sum to {frequencies.sum():.12f}, expected 1")
        if np.any(directions < 0) or np.any(directions >= 360):
            raise FarmModelError("Wind directions must lie in [0, 360)")
        if np.any(np.diff(directions) <= 0):
            raise FarmModelError("Wind directions must be strictly increasing")
        if np.any(speeds <= 0):
            raise FarmModelError("Free-stream speeds must be > 0")
        for arr in (directions, frequencies, speeds):
            arr.setflags(write=False)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "speeds", speeds)

    @property
    def n_bins(self) -> int:
        return int(self.directions.size)

    @classmethod
    def uniform(cls, n_bins: int = 16, speed: float = 9.8) -> "WindRose":
        directions = np.arange(n_bins) * (360.0 / n_bins)
        return cls(directions, np.full(n_bins, 1.0 / n_bins), np.full(n_bins, speed))


def _duplicate_rows(x: np.ndarray, y: np.ndarray) -> List[Tuple[float, float]]:
    seen = set()
    duplicates = []
    for xi, yi in zip(x.tolist(), y.tolist()):
        key = (xi, yi)
        if key in seen:
            duplicates.append(key)
        seen.add(key)
    return duplicates


def generate_circular_grid(radius: float, spacing: float, mode: Union[str, GridMode] = GridMode.CENTERED) -> CandidateGrid:
    """
    Square lattice points inside a circle of the given radius.

    centered: lattice (i*s, j*s), origin included.
    offset:   lattice ((i+1/2)*s, (j+1/2)*s).

    Points on the circle are kept. Ordering is row-major: by y, then x.
    """
    if radius <= 0 or spacing <= 0:
        raise FarmModelError(f"radius and spacing must be > 0, got radius={radius}, spacing={spacing}")
    mode = GridMode(mode)
    if mode == GridMode.EXTERNAL:
        raise FarmModelError("External grids are loaded with load_grid(), not generated")

    shift = 0.5 if mode == GridMode.OFFSET else 0.0
    n = int(math.ceil(radius / spacing)) + 1
    indices = np.arange(-n, n + 1, dtype=float) + shift
    coords = indices * spacing
    # meshgrid with 'xy' indexing: rows follow y, columns follow x
    xx, yy = np.meshgrid(coords, coords)
    xx = xx.ravel()
    yy = yy.ravel()
    inside = xx * xx + yy * yy <= radius * radius

    grid = CandidateGrid(
        x=xx[inside],
        y=yy[inside],
        boundary_radius=float(radius),
        grid_spacing=float(spacing),
        grid_mode=mode,
    )
    logger.debug(f"Generated {mode.value} grid: R={radius} m, s={spacing} m, N={grid.n_sites}")
    return grid


def load_grid(path: Union[str, Path]) -> CandidateGrid:
    """
    Load candidate sites from a CSV file with header `x,y` (meters).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Grid file not found: {path}")

    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise FarmModelError(f"Grid file is empty: {path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise FarmModelError(f"Could not parse grid file {path}: {e}")

    df.columns = df.columns.str.strip()
    missing = {"x", "y"} - set(df.columns)
    if missing:
        raise FarmModelError(f"Grid file {path} is missing columns: {sorted(missing)}")
    if df.empty:
        raise FarmModelError(f"Grid file has no sites: {path}")

    try:
        x = pd.to_numeric(df["x"], errors="raise").to_numpy(dtype=float)
        y = pd.to_numeric(df["y"], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise FarmModelError(f"Non-numeric coordinates in {path}: {e}")

    duplicates = _duplicate_rows(x, y)
    if duplicates:
        raise FarmModelError(f"Duplicate grid points in {path}: {duplicates[:5]}")

    radius = float(np.sqrt(x * x + y * y).max())
    spacing = 0.0
    if x.size > 1:
        spacing = float(pdist(np.column_stack([x, y])).min())

    logger.info(f"Loaded {x.size} candidate sites from {path.name}")
    return CandidateGrid(x=x, y=y, boundary_radius=radius, grid_spacing=spacing, grid_mode=GridMode.EXTERNAL)


def load_wind_rose(path: Union[str, Path]) -> WindRose:
    """
    Load a wind rose from a CSV file with header `direction_deg,frequency,speed_ms`.

    Frequencies summing to within 1e-6 of one are renormalized to sum exactly to one.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Wind rose file not found: {path}")

    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise FarmModelError(f"Wind rose file is empty: {path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise FarmModelError(f"Could not parse wind rose file {path}: {e}")

    df.columns = df.columns.str.strip()
    required = ["direction_deg", "frequency", "speed_ms"]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise FarmModelError(f"Wind rose file {path} is missing columns: {missing}")
    if df.empty:
        raise FarmModelError(f"Wind rose file has no bins: {path}")

    try:
        values = df[required].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise FarmModelError(f"Non-numeric wind rose values in {path}: {e}")
    directions, frequencies, speeds = values.T

    if np.any(frequencies < 0):
        raise FarmModelError(f"Negative frequency in {path}")
    if np.any(np.diff(directions) <= 0):
        raise FarmModelError(f"Directions in {path} must be strictly increasing")
    total = frequencies.sum()
    if abs(total - 1.0) > ROSE_SUM_TOLERANCE:
        raise FarmModelError(f"Frequencies in {path} sum to {total:.9f}; cannot normalize (tolerance {ROSE_SUM_TOLERANCE})")
    frequencies = frequencies / total

    rose = WindRose(directions=directions, frequencies=frequencies, speeds=speeds)
    logger.info(f"Loaded wind rose with {rose.n_bins} bins from {path.name}")
    return rose


def propagation_vector(direction: float) -> Tuple[float, float]:
    """Unit vector along which the wind travels, for a FROM direction in degrees"""
    theta = math.radians(direction)
    return -math.sin(theta), -math.cos(theta)


def rotate_to_wind_frame(grid: Union[CandidateGrid, np.ndarray], direction: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Downwind and crosswind coordinates of every site for one wind direction.

    The +x axis of the returned frame points along the wind propagation,
    so a larger downwind coordinate means further downstream.
    """
    coords = grid.coordinates if isinstance(grid, CandidateGrid) else np.asarray(grid, dtype=float)
    ex, ey = propagation_vector(direction)
    x, y = coords[:, 0], coords[:, 1]
    downwind = x * ex + y * ey
    crosswind = -x * ey + y * ex
    return downwind, crosswind
