"""
Farm model: turbine data, candidate grids and wind roses
"""

from .farm_model import (
    CandidateGrid,
    FarmModelError,
    GridMode,
    TurbineSpec,
    WindRose,
    generate_circular_grid,
    load_grid,
    load_wind_rose,
)

__all__ = [
    "CandidateGrid",
    "FarmModelError",
    "GridMode",
    "TurbineSpec",
    "WindRose",
    "generate_circular_grid",
    "load_grid",
    "load_wind_rose",
]
