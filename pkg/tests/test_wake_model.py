#!/usr/bin/env python3
"""
Tests del modelo de estela gaussiano y del tensor de déficits precalculado
"""

import math
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.farm.farm_model import CandidateGrid, TurbineSpec, WindRose, generate_circular_grid, rotate_to_wind_frame
from src.wake.gaussian_wake import (
    DeficitTensor,
    WakeModelError,
    WakeParams,
    dump_deficit_tensor,
    expansion_rates,
    gaussian_deficit,
    precompute_deficit_tensor,
    wake_stddevs,
)


def two_site_grid(distance: float = 500.0) -> CandidateGrid:
    return CandidateGrid(x=[0.0, distance], y=[0.0, 0.0], boundary_radius=distance,
                         grid_spacing=distance, grid_mode="external")


class TestExpansionAndWidth(unittest.TestCase):
    """Tasas de expansión y anchura de la estela"""

    def test_expansion_rates(self):
        k_y, k_z = expansion_rates(0.075)
        self.assertAlmostEqual(k_y, 0.0324555, places=7)
        self.assertEqual(k_y, k_z)
        self.assertAlmostEqual(expansion_rates(1.0)[0], 0.387378, places=7)
        self.assertAlmostEqual(expansion_rates(1e-12)[0], 0.003678, places=9)

    def test_expansion_rejects_non_positive_ti(self):
        with self.assertRaises(WakeModelError):
            expansion_rates(0.0)
        with self.assertRaises(WakeModelError):
            WakeParams(turbulence_intensity=-0.1)

    def test_only_aligned_wakes(self):
        with self.assertRaises(WakeModelError):
            WakeParams(yaw=0.1)

    def test_stddevs(self):
        turbine, params = TurbineSpec(), WakeParams()
        sigma_y, sigma_z = wake_stddevs(0.0, turbine, params)
        self.assertAlmostEqual(sigma_y, 130.0 / math.sqrt(8.0), places=9)
        self.assertAlmostEqual(sigma_y, 45.9619, places=4)
        self.assertEqual(sigma_y, sigma_z)
        sigma_y, _ = wake_stddevs(1000.0, turbine, params)
        self.assertAlmostEqual(sigma_y, 78.4174, places=4)

    def test_stddevs_arrays_and_errors(self):
        sigma_y, _ = wake_stddevs(np.array([0.0, 1000.0]), TurbineSpec(), WakeParams())
        self.assertEqual(sigma_y.shape, (2,))
        with self.assertRaises(WakeModelError):
            wake_stddevs(-1.0, TurbineSpec(), WakeParams())


class TestGaussianDeficit(unittest.TestCase):
    """Déficit de velocidad de una estela aislada"""

    def setUp(self):
        self.turbine = TurbineSpec()
        self.params = WakeParams()

    def test_near_rotor_limit(self):
        value = gaussian_deficit(1e-9, 0.0, 0.0, self.turbine, self.params)
        self.assertAlmostEqual(value, 2.0 / 3.0, places=6)

    def test_centerline_at_one_kilometre(self):
        sigma = 0.3837 * 0.075 * 1000.0 + 0.003678 * 1000.0 + 130.0 / math.sqrt(8.0)
        expected = 1.0 - math.sqrt(1.0 - (8.0 / 9.0) * 130.0 ** 2 / (8.0 * sigma ** 2))
        value = gaussian_deficit(1000.0, 0.0, 0.0, self.turbine, self.params)
        self.assertAlmostEqual(value, expected, places=12)
        self.assertAlmostEqual(value, 0.166553, places=5)

    def test_lateral_decay(self):
        center = gaussian_deficit(1000.0, 0.0, 0.0, self.turbine, self.params)
        side = gaussian_deficit(1000.0, 100.0, 0.0, self.turbine, self.params)
        far = gaussian_deficit(1000.0, 5000.0, 0.0, self.turbine, self.params)
        self.assertLess(side, center)
        self.assertGreater(side, 0.0)
        self.assertLess(far, 1e-12)
        self.assertAlmostEqual(side, gaussian_deficit(1000.0, -100.0, 0.0, self.turbine, self.params), places=15)

    def test_decreases_downstream(self):
        values = gaussian_deficit(np.array([200.0, 500.0, 1000.0, 3000.0]), 0.0, 0.0, self.turbine, self.params)
        self.assertTrue(np.all(np.diff(values) < 0))
        self.assertTrue(np.all((values >= 0) & (values < 1)))

    def test_rejects_non_downstream_points(self):
        with self.assertRaises(WakeModelError):
            gaussian_deficit(0.0, 0.0, 0.0, self.turbine, self.params)
        with self.assertRaises(WakeModelError):
            gaussian_deficit(np.array([100.0, -1.0]), 0.0, 0.0, self.turbine, self.params)


class TestDeficitTensor(unittest.TestCase):
    """Tensor de déficits por dirección"""

    @classmethod
    def setUpClass(cls):
        cls.turbine = TurbineSpec()
        cls.params = WakeParams()
        cls.grid = generate_circular_grid(1300, 200, "offset")
        cls.rose = WindRose.uniform(16)
        cls.tensor = precompute_deficit_tensor(cls.grid, cls.rose, cls.turbine, cls.params)

    def test_shape_and_diagonal(self):
        self.assertEqual(self.tensor.deficits.shape, (16, 124, 124))
        for i in range(16):
            np.testing.assert_array_equal(np.diag(self.tensor.deficits[i]), 0.0)

    def test_matches_pairwise_evaluation(self):
        for i in (0, 3, 12):
            direction = self.rose.directions[i]
            downwind, crosswind = rotate_to_wind_frame(self.grid, direction)
            for j in range(0, 124, 7):
                for k in range(124):
                    dx = downwind[j] - downwind[k]
                    expected = 0.0
                    if dx > 1e-9:
                        expected = gaussian_deficit(dx, crosswind[j] - crosswind[k], 0.0, self.turbine, self.params)
                    self.assertAlmostEqual(self.tensor.deficits[i, j, k], expected, places=12)

    def test_at_most_one_direction_of_each_pair(self):
        d = self.tensor.deficits
        both = (d > 0) & (np.transpose(d, (0, 2, 1)) > 0)
        self.assertFalse(both.any())

    def test_threaded_build_is_identical(self):
        threaded = precompute_deficit_tensor(self.grid, self.rose, self.turbine, self.params, workers=4)
        np.testing.assert_array_equal(threaded.deficits, self.tensor.deficits)

    def test_single_site_tensor_is_zero(self):
        grid = generate_circular_grid(100, 200, "centered")
        tensor = precompute_deficit_tensor(grid, self.rose, self.turbine, self.params)
        self.assertEqual(tensor.deficits.shape, (16, 1, 1))
        self.assertEqual(tensor.upstream(0, 0).size, 0)
        np.testing.assert_array_equal(tensor.deficits, 0.0)

    def test_two_aligned_sites(self):
        rose = WindRose(directions=[90.0, 180.0, 270.0], frequencies=[0.25, 0.25, 0.5], speeds=[9.8, 9.8, 9.8])
        tensor = precompute_deficit_tensor(two_site_grid(), rose, self.turbine, self.params)
        # westerly: site 1 sits behind site 0
        np.testing.assert_array_equal(tensor.upstream(2, 1), [0])
        self.assertEqual(tensor.upstream(2, 0).size, 0)
        # easterly: reversed
        np.testing.assert_array_equal(tensor.upstream(0, 0), [1])
        self.assertEqual(int((tensor.deficits[0] > 0).sum()), 1)
        self.assertEqual(int((tensor.deficits[2] > 0).sum()), 1)
        self.assertAlmostEqual(tensor.deficits[2, 1, 0], gaussian_deficit(500.0, 0.0, 0.0, self.turbine, self.params),
                               places=12)
        # crosswind: nobody is downstream
        self.assertEqual(int((tensor.deficits[1] > 0).sum()), 0)

    def test_rotating_grid_and_rose_together(self):
        theta = math.radians(30.0)
        grid = self.grid
        # rotating the site coordinates clockwise by 30 deg is the same as moving the wind 30 deg clockwise
        x = grid.x * math.cos(theta) + grid.y * math.sin(theta)
        y = -grid.x * math.sin(theta) + grid.y * math.cos(theta)
        rotated = CandidateGrid(x=x, y=y, boundary_radius=grid.boundary_radius,
                                grid_spacing=grid.grid_spacing, grid_mode="external")
        rose = WindRose(directions=[270.0], frequencies=[1.0], speeds=[9.8])
        shifted = WindRose(directions=[300.0], frequencies=[1.0], speeds=[9.8])
        a = precompute_deficit_tensor(grid, rose, self.turbine, self.params)
        b = precompute_deficit_tensor(rotated, shifted, self.turbine, self.params)
        np.testing.assert_allclose(a.deficits, b.deficits, atol=1e-9)

    def test_tensor_is_read_only(self):
        with self.assertRaises(ValueError):
            self.tensor.deficits[0, 0, 1] = 0.5
        with self.assertRaises(ValueError):
            self.tensor.squared_deficits[0, 0, 1] = 0.5

    def test_rejects_bad_shape(self):
        with self.assertRaises(WakeModelError):
            DeficitTensor(deficits=np.zeros((2, 3, 4)), directions=[0.0, 180.0])

    def test_dump(self):
        rose = WindRose(directions=[0.0, 270.0], frequencies=[0.5, 0.5], speeds=[9.8, 9.8])
        tensor = precompute_deficit_tensor(two_site_grid(), rose, self.turbine, self.params)
        with tempfile.TemporaryDirectory() as tmp:
            paths = dump_deficit_tensor(tensor, Path(tmp) / "deficits")
            self.assertEqual([p.name for p in paths], ["deficit_dir_00_000.csv", "deficit_dir_01_270.csv"])
            block = pd.read_csv(paths[1], header=None).to_numpy()
            np.testing.assert_allclose(block, tensor.deficits[1], rtol=1e-11)


if __name__ == "__main__":
    unittest.main()
