#!/usr/bin/env python3
"""
Tests de la configuración, los artefactos, las figuras y la línea de comandos
"""

import io
import json
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stdout
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent))

from scripts.run_layout_optimization import main
from src.energy.aep_objective import InterpolationKind
from src.farm.farm_model import CandidateGrid, TurbineSpec, generate_circular_grid, rotate_to_wind_frame
from src.reporting.artifacts import (
    HISTORY_COLUMNS,
    LAYOUT_COLUMNS,
    list_artifacts,
    read_layout,
    staged_output,
)
from src.reporting.flow_field import evaluate_flow_field
from src.reporting.run_config import ConfigError, load_run_config, parse_run_config
from src.reporting.runner import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, compare, evaluate, evaluate_layout, prepare, run
from src.reporting.svg_plots import density_histogram_counts, plot_history, plot_history_comparison
from src.solvers.results import IterationRecord
from src.wake.gaussian_wake import WakeParams, gaussian_deficit

ROOT = Path(__file__).parent.parent
DATA_DIR = ROOT / "data"
CONFIG_DIR = ROOT / "configs"

RUN_ARTIFACTS = [
    "density_histogram.svg",
    "flow_field.csv",
    "flow_field.svg",
    "history.csv",
    "history.svg",
    "interpolation.svg",
    "layout.csv",
    "layout.svg",
    "result.json",
]


def toy_config(**overrides) -> dict:
    config = {
        "schema_version": 1,
        "name": "toy",
        "grid": {"file": str(DATA_DIR / "line_8_sites.csv")},
        "wind_rose": str(DATA_DIR / "single_direction_270.csv"),
        "n_min": 1,
        "n_max": 8,
        "spacing_factor": 2.0,
        "interpolation": {"kind": "ramp"},
        "solver": "brute",
        "mma": {"max_iterations": 30},
        "ga": {"population_size": 100, "max_generations": 20, "stall_generations": 5},
        "output_dir": "toy",
        "seed": 0,
    }
    config.update(overrides)
    return config


class TempDirTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, data: dict, name: str = "config.json") -> Path:
        path = self.dir / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path


class TestRunConfig(TempDirTestCase):
    """Lectura y validación del archivo de configuración"""

    def test_shipped_configs_parse(self):
        for path in sorted(CONFIG_DIR.glob("*.json")):
            config = load_run_config(path)
            self.assertLessEqual(config.n_min, config.n_max, path.name)
        example = load_run_config(CONFIG_DIR / "example1_r1300.json")
        self.assertEqual(example.grid.build().n_sites, 124)
        self.assertEqual((example.n_min, example.n_max), (16, 64))
        self.assertEqual(example.scheme.kind, InterpolationKind.RAMP)
        self.assertEqual(load_run_config(CONFIG_DIR / "example2_r3000.json").mma.initial_density, 0.1805)
        self.assertEqual(load_run_config(CONFIG_DIR / "example1_no_ramp.json").mma.fixed_q, 0.0)
        self.assertEqual(example.mma.max_iterations, 1000)
        ga = load_run_config(CONFIG_DIR / "example1_ga.json").ga
        self.assertEqual((ga.population_size, ga.stall_generations, ga.max_generations), (5000, 100, 1000))
        self.assertEqual(ga.function_tolerance, 1e-8)
        self.assertEqual(load_run_config(CONFIG_DIR / "example2_ga.json").ga.population_size, 10000)
        no_ramp = load_run_config(CONFIG_DIR / "example2_no_ramp.json")
        self.assertEqual((no_ramp.mma.fixed_q, no_ramp.n_min, no_ramp.n_max), (0.0, 64, 256))
        simp = load_run_config(CONFIG_DIR / "example1_simp.json")
        self.assertEqual(simp.scheme.kind, InterpolationKind.SIMP)
        self.assertEqual(simp.mma.penalty_at(1), 1.0)

    def test_relative_paths_resolve_against_config(self):
        config = load_run_config(CONFIG_DIR / "toy_line_brute.json")
        self.assertEqual(config.grid.build().n_sites, 8)
        self.assertTrue(config.wind_rose_path.exists())

    def test_validation_errors(self):
        cases = [
            toy_config(schema_version=2),
            toy_config(n_min=5, n_max=3),
            toy_config(n_min=-1),
            toy_config(solver="sqp"),
            toy_config(spacing_factor=0),
            toy_config(mma={"move_limt": 0.1}),
            toy_config(mma={"move_limit": 2.0}),
            toy_config(interpolation={"kind": "simp", "penalty": 0.5}),
            toy_config(interpolation={"kind": "simp", "penalty": 1.0}),
            toy_config(interpolation={"kind": "simp", "penalty": 1.0}, mma={"fixed_q": 0.0}),
            toy_config(turbine={"rotor_diameter": -1}),
            toy_config(grid={"radius": 1000, "spacing": 200, "mode": "hexagonal"}),
            toy_config(grid={"spacing": 200}),
        ]
        for data in cases:
            with self.assertRaises(ConfigError, msg=json.dumps(data)):
                parse_run_config(data)

    def test_missing_files(self):
        with self.assertRaises(FileNotFoundError):
            parse_run_config(toy_config(wind_rose=str(self.dir / "missing.csv")))
        with self.assertRaises(FileNotFoundError):
            parse_run_config(toy_config(grid={"file": str(self.dir / "missing.csv")}))
        with self.assertRaises(FileNotFoundError):
            load_run_config(self.dir / "missing.json")

    def test_invalid_json(self):
        path = self.dir / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_hash_and_seed(self):
        a = parse_run_config(toy_config(seed=3))
        b = parse_run_config(toy_config(seed=3))
        c = parse_run_config(toy_config(seed=4))
        self.assertEqual(a.config_hash, b.config_hash)
        self.assertNotEqual(a.config_hash, c.config_hash)
        self.assertEqual(a.ga.seed, 3)

    def test_output_root_from_environment(self):
        config = parse_run_config(toy_config())
        with patch.dict(os.environ, {"WFTO_OUTPUT_ROOT": str(self.dir)}):
            self.assertEqual(config.resolve_output_dir(), self.dir / "toy")
            self.assertEqual(config.resolve_output_dir("other"), self.dir / "other")
        self.assertEqual(config.resolve_output_dir(self.dir / "abs"), self.dir / "abs")


class TestArtifacts(TempDirTestCase):
    """Escritura atómica de artefactos"""

    def test_staged_output_moves_on_success(self):
        target = self.dir / "out"
        with staged_output(target) as staging:
            (staging / "a.txt").write_text("a")
        self.assertEqual(list_artifacts(target), ["a.txt"])
        self.assertEqual(sorted(p.name for p in self.dir.iterdir()), ["out"])

    def test_staged_output_discards_on_error(self):
        target = self.dir / "out"
        with self.assertRaises(RuntimeError):
            with staged_output(target) as staging:
                (staging / "a.txt").write_text("a")
                raise RuntimeError("boom")
        self.assertFalse(target.exists())
        self.assertEqual(list(self.dir.iterdir()), [])

    def test_read_layout_validation(self):
        path = self.dir / "layout.csv"
        pd.DataFrame({"index": [0], "x": [0.0], "y": [0.0], "rho": [0.3], "selected": [2]}).to_csv(path, index=False)
        with self.assertRaises(ValueError):
            read_layout(path)
        pd.DataFrame({"x": [0.0], "y": [0.0]}).to_csv(path, index=False)
        with self.assertRaises(ValueError):
            read_layout(path)
        with self.assertRaises(FileNotFoundError):
            read_layout(self.dir / "missing.csv")


class TestRunCommand(TempDirTestCase):
    """Ejecución completa desde un archivo de configuración"""

    def test_brute_run_writes_all_artifacts(self):
        config_path = self.write_config(toy_config())
        out = self.dir / "run"
        self.assertEqual(run(config_path, out=out, dump_tensor=True), EXIT_OK)
        self.assertEqual(list_artifacts(out), sorted(RUN_ARTIFACTS + ["deficits", "neighbors.csv"]))

        layout = pd.read_csv(out / "layout.csv")
        self.assertEqual(list(layout.columns), LAYOUT_COLUMNS)
        np.testing.assert_array_equal(layout["selected"], [1, 0, 0, 0, 0, 0, 0, 1])
        history = pd.read_csv(out / "history.csv")
        self.assertEqual(list(history.columns), HISTORY_COLUMNS)

        with open(out / "result.json", encoding="utf-8") as f:
            result = json.load(f)
        self.assertEqual(result["solver"], "brute")
        self.assertEqual(result["turbine_count"], 2)
        self.assertEqual(result["termination"], "exhaustive")
        self.assertEqual(result["config_hash"], load_run_config(config_path).config_hash)
        self.assertEqual(len(list((out / "deficits").iterdir())), 1)

    def test_layout_round_trip(self):
        config_path = self.write_config(toy_config(solver="mma"))
        out = self.dir / "run"
        self.assertEqual(run(config_path, out=out), EXIT_OK)
        with open(out / "result.json", encoding="utf-8") as f:
            stored = json.load(f)["aep_gwh"]
        value = evaluate_layout(prepare(load_run_config(config_path)), out / "layout.csv")
        self.assertAlmostEqual(value, stored, delta=1e-9 * stored)
        self.assertEqual(evaluate(config_path, out / "layout.csv"), EXIT_OK)

    def test_evaluate_rejects_foreign_layout(self):
        config_path = self.write_config(toy_config())
        path = self.dir / "layout.csv"
        pd.DataFrame({"index": [0, 1], "x": [0.0, 1.0], "y": [0.0, 0.0], "rho": [1.0, 0.0],
                      "selected": [1, 0]}).to_csv(path, index=False)
        self.assertEqual(evaluate(config_path, path), EXIT_CONFIG)

    def test_svg_output_is_deterministic(self):
        config_path = self.write_config(toy_config())
        self.assertEqual(run(config_path, out=self.dir / "a"), EXIT_OK)
        self.assertEqual(run(config_path, out=self.dir / "b"), EXIT_OK)
        for name in ("layout.svg", "history.svg", "density_histogram.svg", "flow_field.svg", "interpolation.svg"):
            self.assertEqual((self.dir / "a" / name).read_bytes(), (self.dir / "b" / name).read_bytes(), name)

    def test_inverted_bounds_exit_code(self):
        config_path = self.write_config(toy_config(n_min=6, n_max=2))
        out = self.dir / "run"
        self.assertEqual(run(config_path, out=out), EXIT_CONFIG)
        self.assertFalse(out.exists())

    def test_solver_failure_leaves_no_artifacts(self):
        config_path = self.write_config(toy_config(
            grid={"radius": 1300, "spacing": 200, "mode": "offset"}, n_min=16, n_max=64))
        out = self.dir / "run"
        self.assertEqual(run(config_path, out=out), EXIT_SOLVER)
        self.assertFalse(out.exists())
        self.assertEqual(sorted(p.name for p in self.dir.iterdir()), ["config.json"])

    def test_infeasible_problem_exit_code(self):
        grid = self.dir / "pair.csv"
        grid.write_text("x,y\n0,0\n200,0\n", encoding="utf-8")
        config_path = self.write_config(toy_config(grid={"file": str(grid)}, n_min=2, n_max=2))
        self.assertEqual(run(config_path, out=self.dir / "run"), EXIT_SOLVER)
        self.assertFalse((self.dir / "run").exists())

    def test_compare_writes_table(self):
        config_path = self.write_config(toy_config())
        out = self.dir / "cmp"
        self.assertEqual(compare(config_path, solvers=("brute", "ga"), out=out, seed=1), EXIT_OK)
        table = pd.read_csv(out / "comparison.csv")
        self.assertEqual(list(table["solver"]), ["brute", "ga"])
        self.assertTrue(table["feasible"].all())
        self.assertGreaterEqual(table["aep_gwh"].iloc[0], table["aep_gwh"].iloc[1] - 1e-9)
        self.assertEqual(list_artifacts(out), ["comparison.csv", "history_comparison.svg"])

    def test_single_site_farm(self):
        grid = self.dir / "single.csv"
        grid.write_text("x,y\n0,0\n", encoding="utf-8")
        config_path = self.write_config(toy_config(grid={"file": str(grid)}, n_min=1, n_max=1))
        out = self.dir / "run"
        self.assertEqual(run(config_path, out=out), EXIT_OK)
        self.assertEqual(list_artifacts(out), RUN_ARTIFACTS)
        np.testing.assert_array_equal(pd.read_csv(out / "layout.csv")["selected"], [1])

    def test_runner_leaves_console_output_to_the_caller(self):
        config_path = self.write_config(toy_config())
        reported = []
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            code = run(config_path, out=self.dir / "run", report=lambda title, rows: reported.append((title, rows)))
            self.assertEqual(evaluate(config_path, self.dir / "run" / "layout.csv"), EXIT_OK)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(buffer.getvalue(), "")
        self.assertEqual(len(reported), 1)
        title, rows = reported[0]
        self.assertEqual(title, "toy")
        self.assertEqual(rows[0]["solver"], "brute")
        self.assertEqual(rows[0]["turbine_count"], 2)

    def test_cli_main(self):
        config_path = self.write_config(toy_config())
        out = self.dir / "cli"
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            self.assertEqual(main(["run", str(config_path), "--out", str(out), "--seed", "5"]), EXIT_OK)
        self.assertIn("AEP [GWh]", buffer.getvalue())
        self.assertIn("brute", buffer.getvalue())
        self.assertTrue((out / "result.json").exists())
        with open(out / "result.json", encoding="utf-8") as f:
            self.assertEqual(json.load(f)["seed"], 5)
        self.assertEqual(main(["evaluate", str(config_path), str(out / "layout.csv")]), EXIT_OK)
        self.assertEqual(main(["compare", str(config_path), "--solvers", "brute,sqp"]), EXIT_CONFIG)
        self.assertEqual(main(["run", str(self.dir / "missing.json")]), EXIT_CONFIG)


class TestFlowField(unittest.TestCase):
    """Mapa de velocidades efectivas"""

    def setUp(self):
        self.turbine = TurbineSpec()
        self.params = WakeParams()
        self.grid = generate_circular_grid(1300, 200, "offset")

    def test_no_turbines_gives_free_stream(self):
        field = evaluate_flow_field(self.grid, np.zeros(124), self.turbine, self.params, resolution=200.0)
        np.testing.assert_array_equal(field.speeds, 9.8)
        self.assertEqual(field.speeds.shape, (field.ys.size, field.xs.size))

    def test_single_turbine_matches_deficit(self):
        selected = np.zeros(124)
        selected[60] = 1
        field = evaluate_flow_field(self.grid, selected, self.turbine, self.params, direction=270.0,
                                    resolution=100.0)
        source = self.grid.coordinates[60]
        frame = field.to_frame()
        points = frame[["x", "y"]].to_numpy()
        down, cross = rotate_to_wind_frame(points - source, 270.0)
        for (dx, dy), speed in list(zip(zip(down, cross), frame["speed_ms"]))[::37]:
            expected = 9.8
            if dx > 1e-9:
                expected = 9.8 * (1.0 - gaussian_deficit(dx, dy, 0.0, self.turbine, self.params))
            self.assertAlmostEqual(speed, expected, places=9)

    def test_centerline_recovers_downstream(self):
        grid = CandidateGrid(x=[-1000.0], y=[0.0], boundary_radius=1000.0, grid_spacing=200.0, grid_mode="external")
        field = evaluate_flow_field(grid, [1], self.turbine, self.params, resolution=50.0)
        row = field.speeds[np.flatnonzero(np.isclose(field.ys, 0.0))[0]]
        behind = row[field.xs > -1000.0]
        self.assertTrue(np.all(np.diff(behind) > 0))
        self.assertTrue(np.all(behind < 9.8))

    def test_resolution_errors(self):
        with self.assertRaises(ValueError):
            evaluate_flow_field(self.grid, np.zeros(124), self.turbine, self.params, resolution=0.0)
        with self.assertRaises(ValueError):
            evaluate_flow_field(self.grid, np.zeros(124), self.turbine, self.params, resolution=5000.0)

    def test_single_site_raster_spans_two_diameters(self):
        grid = CandidateGrid(x=[0.0], y=[0.0], boundary_radius=0.0, grid_spacing=0.0, grid_mode="external")
        field = evaluate_flow_field(grid, [1], self.turbine, self.params)
        self.assertAlmostEqual(field.xs[0], -130.0, places=9)
        self.assertAlmostEqual(field.xs[-1], 130.0, places=6)
        self.assertEqual(field.speeds.shape, (9, 9))
        self.assertTrue(np.all(field.speeds[:, field.xs <= 0.0] == 9.8))


class TestFigures(TempDirTestCase):
    """Figuras SVG"""

    def test_empty_history_is_rejected(self):
        with self.assertRaises(ValueError):
            plot_history([], self.dir / "history.svg")
        with self.assertRaises(ValueError):
            plot_history_comparison({"MMA": [], "GA": []}, self.dir / "history_comparison.svg")

    def test_history_comparison_is_deterministic(self):
        histories = {
            "MMA": [IterationRecord(iteration=i, q=0.0, aep_gwh=500.0 + i, max_violation=0.0, step_norm=0.1)
                    for i in range(1, 6)],
            "BRUTE": [IterationRecord(iteration=1, q=float("nan"), aep_gwh=510.0, max_violation=0.0,
                                      step_norm=float("nan"))],
        }
        path = plot_history_comparison(histories, self.dir / "history_comparison.svg")
        svg = path.read_text(encoding="utf-8")
        self.assertTrue(svg.lstrip().startswith("<?xml"))
        again = plot_history_comparison(histories, self.dir / "again.svg")
        self.assertEqual(again.read_text(encoding="utf-8"), svg)

    def test_binary_histogram_mass_at_ends(self):
        counts = density_histogram_counts(np.array([0.0, 0.0, 1.0, 1.0, 1.0]))
        self.assertEqual(counts[0], 2)
        self.assertEqual(counts[-1], 3)
        self.assertEqual(counts[1:-1].sum(), 0)


if __name__ == "__main__":
    unittest.main()
