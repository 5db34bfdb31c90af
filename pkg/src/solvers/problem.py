"""
Everything a solver needs about one layout problem, bundled.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.constraints.layout_constraints import ConstraintSystem
from src.energy.aep_objective import InterpolationKind, InterpolationScheme, ObjectiveReport, aep, aep_batch
from src.farm.farm_model import CandidateGrid, TurbineSpec, WindRose
from src.wake.gaussian_wake import DeficitTensor

logger = logging.getLogger(__name__)

# Binary designs are evaluated without penalization (rho_t == rho at 0 and 1)
BINARY_SCHEME = InterpolationScheme(InterpolationKind.LINEAR)


@dataclass(frozen=True, eq=False)
class LayoutProblem:
    grid: CandidateGrid
    turbine: TurbineSpec
    rose: WindRose
    tensor: DeficitTensor
    constraints: ConstraintSystem
    scheme: InterpolationScheme = InterpolationScheme()

    @property
    def n_sites(self) -> int:
        return self.grid.n_sites

    def evaluate(self, rho, penalty: float) -> ObjectiveReport:
        """AEP and gradient at rho with the scheme's penalty set to `penalty`"""
        return aep(rho, self.scheme.with_penalty(penalty), self.tensor, self.rose, self.turbine)

    def binary_aep(self, selected) -> float:
        return float(self.binary_aep_batch(np.atleast_2d(selected))[0])

    def binary_aep_batch(self, designs) -> np.ndarray:
        return aep_batch(np.asarray(designs, dtype=float), BINARY_SCHEME, self.tensor, self.rose, self.turbine)
