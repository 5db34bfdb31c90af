"""
Config-driven orchestration behind the command-line front end.

run / evaluate / compare return process exit codes: 0 ok, 2 configuration or
input error, 3 solver failure or infeasible result.
"""

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.constraints.layout_constraints import build_constraint_system, dump_neighbor_pairs
from src.energy.aep_objective import aep
from src.farm.farm_model import CandidateGrid, WindRose, load_wind_rose
from src.reporting.artifacts import (
    list_artifacts,
    read_layout,
    staged_output,
    write_history,
    write_layout,
    write_result_json,
)
from src.reporting.flow_field import evaluate_flow_field
from src.reporting.run_config import ConfigError, RunConfig, load_run_config, worker_count
from src.reporting.svg_plots import (
    plot_density_histogram,
    plot_flow_field,
    plot_history,
    plot_history_comparison,
    plot_interpolation_curves,
    plot_layout,
)
from src.solvers.brute_force import brute_force_solve
from src.solvers.genetic_optimizer import ga_solve
from src.solvers.mma_optimizer import mma_solve
from src.solvers.problem import BINARY_SCHEME, LayoutProblem
from src.solvers.results import SolveResult, SolverError
from src.wake.gaussian_wake import dump_deficit_tensor, precompute_deficit_tensor

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

# Coordinates in a layout file must match the config grid this closely [m]
LAYOUT_COORDINATE_TOLERANCE = 1e-6

# (title, summary rows) and (layout path, AEP [GWh]) sinks for the console front end
SummaryReporter = Callable[[str, List[Dict]], None]
AepReporter = Callable[[str, float], None]


@dataclass
class PreparedRun:
    config: RunConfig
    grid: CandidateGrid
    rose: WindRose
    problem: LayoutProblem


def _progress_enabled() -> bool:
    return logging.getLogger().isEnabledFor(logging.INFO)


def prepare(config: RunConfig) -> PreparedRun:
    """Grid, wind rose, deficit tensor and constraints for a config"""
    grid = config.grid.build()
    rose = load_wind_rose(config.wind_rose_path)
    tensor = precompute_deficit_tensor(grid, rose, config.turbine, config.wake,
                                       workers=worker_count(), progress=_progress_enabled())
    constraints = build_constraint_system(grid, config.turbine, config.n_min, config.n_max, config.spacing_factor)
    problem = LayoutProblem(grid=grid, turbine=config.turbine, rose=rose, tensor=tensor,
                            constraints=constraints, scheme=config.scheme)
    return PreparedRun(config=config, grid=grid, rose=rose, problem=problem)


def solve(problem: LayoutProblem, config: RunConfig, solver: Optional[str] = None) -> SolveResult:
    solver = solver or config.solver
    if solver == "mma":
        return mma_solve(problem, config.mma)
    if solver == "ga":
        return ga_solve(problem, config.ga, progress=_progress_enabled())
    if solver == "brute":
        return brute_force_solve(problem, progress=_progress_enabled())
    raise ConfigError(f"Unknown solver '{solver}'")


def _with_seed(config: RunConfig, seed: Optional[int]) -> RunConfig:
    if seed is None:
        return config
    return replace(config, seed=seed, ga=replace(config.ga, seed=seed))


def _exit_code(error: BaseException) -> int:
    if isinstance(error, SolverError):
        logger.error(f"❌ Solver failure: {error}")
        if error.iteration_dump:
            logger.debug(f"Iteration dump: {json.dumps(error.iteration_dump)[:2000]}")
        return EXIT_SOLVER
    logger.error(f"❌ {type(error).__name__}: {error}")
    return EXIT_CONFIG


def _flow_free_stream(rose: WindRose, direction: float) -> float:
    gap = np.abs((rose.directions - direction + 180.0) % 360.0 - 180.0)
    return float(rose.speeds[int(np.argmin(gap))])


def write_run_artifacts(
    prepared: PreparedRun,
    result: SolveResult,
    output_dir: Path,
    dump_tensor: bool = False,
    flow_direction: float = 270.0,
) -> Path:
    config, grid, problem = prepared.config, prepared.grid, prepared.problem
    field = evaluate_flow_field(grid, result.selected, config.turbine, config.wake, direction=flow_direction,
                                free_stream=_flow_free_stream(prepared.rose, flow_direction))
    with staged_output(output_dir) as staging:
        write_layout(staging, grid, result)
        write_history(staging, result)
        write_result_json(staging, result, config.config_hash, extra={
            "name": config.name,
            "n_sites": grid.n_sites,
            "seed": config.seed,
            "flow_direction_deg": flow_direction,
        })
        plot_layout(grid, result.selected, problem.constraints.min_distance, staging / "layout.svg",
                    title=f"{result.solver.upper()}: {result.turbine_count} turbines")
        if result.history:
            plot_history(result.history, staging / "history.svg", label=result.solver.upper())
        plot_density_histogram(result.rho, staging / "density_histogram.svg")
        field.to_frame().to_csv(staging / "flow_field.csv", index=False, float_format="%.6f")
        plot_flow_field(field, grid, result.selected, staging / "flow_field.svg")
        plot_interpolation_curves(staging / "interpolation.svg", kinds=(config.scheme.kind,))
        if dump_tensor:
            dump_deficit_tensor(problem.tensor, staging / "deficits")
            dump_neighbor_pairs(problem.constraints, grid, staging / "neighbors.csv")
    logger.info(f"💾 Artifacts written to {output_dir}")
    logger.debug(f"Artifacts: {', '.join(list_artifacts(output_dir))}")
    return output_dir


def run(
    config_path: Union[str, Path],
    out: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
    dump_tensor: bool = False,
    flow_direction: float = 270.0,
    report: Optional[SummaryReporter] = None,
) -> int:
    try:
        config = _with_seed(load_run_config(config_path), seed)
        output_dir = config.resolve_output_dir(out)
        logger.info(f"📊 Preparing '{config.name}'")
        prepared = prepare(config)
        result = solve(prepared.problem, config)
        if not result.feasible:
            logger.error(f"❌ {result.solver} returned an infeasible layout ({result.termination})")
            if report:
                report(config.name, [result.summary()])
            return EXIT_SOLVER
        write_run_artifacts(prepared, result, output_dir, dump_tensor=dump_tensor, flow_direction=flow_direction)
    except (SolverError, ValueError, FileNotFoundError) as e:
        return _exit_code(e)

    if report:
        report(config.name, [result.summary()])
    logger.info(f"✅ {config.name}: {result.turbine_count} turbines, AEP {result.aep_gwh:.3f} GWh")
    return EXIT_OK


def evaluate_layout(prepared: PreparedRun, layout_path: Union[str, Path]) -> float:
    """AEP [GWh] of a layout.csv written for the same config"""
    df = read_layout(layout_path)
    grid = prepared.grid
    if len(df) != grid.n_sites:
        raise ValueError(f"Layout has {len(df)} sites but the config grid has {grid.n_sites}")
    offset = np.max(np.abs(df[["x", "y"]].to_numpy(dtype=float) - grid.coordinates))
    if offset > LAYOUT_COORDINATE_TOLERANCE:
        raise ValueError(f"Layout coordinates differ from the config grid by up to {offset:.3g} m")
    selected = df["selected"].to_numpy(dtype=float)
    if not prepared.problem.constraints.is_feasible(selected):
        logger.warning("⚠️ Layout violates the configured constraints")
    problem = prepared.problem
    return aep(selected, BINARY_SCHEME, problem.tensor, problem.rose, problem.turbine).aep_gwh


def evaluate(config_path: Union[str, Path], layout_path: Union[str, Path], report: Optional[AepReporter] = None) -> int:
    try:
        prepared = prepare(load_run_config(config_path))
        value = evaluate_layout(prepared, layout_path)
    except (ValueError, FileNotFoundError) as e:
        return _exit_code(e)
    if report:
        report(str(layout_path), value)
    logger.info(f"✅ Layout {layout_path}: AEP {value:.6f} GWh")
    return EXIT_OK


def compare(
    config_path: Union[str, Path],
    solvers: Sequence[str] = ("mma", "ga"),
    out: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
    report: Optional[SummaryReporter] = None,
) -> int:
    """Run several solvers on one problem; writes comparison.csv and history_comparison.svg"""
    rows = []
    histories = {}
    exit_code = EXIT_OK
    try:
        config = _with_seed(load_run_config(config_path), seed)
        prepared = prepare(config)
        for solver in solvers:
            logger.info(f"📊 Solver {solver}")
            try:
                start = time.perf_counter()
                result = solve(prepared.problem, config, solver)
                rows.append(result.summary())
                histories[solver.upper()] = result.history
                if not result.feasible:
                    exit_code = EXIT_SOLVER
            except SolverError as e:
                _exit_code(e)
                exit_code = EXIT_SOLVER
                rows.append({"solver": solver, "turbine_count": 0, "aep_gwh": None, "iterations": 0,
                             "evaluations": 0, "wall_seconds": time.perf_counter() - start, "feasible": False})
        output_dir = config.resolve_output_dir(out)
        with staged_output(output_dir) as staging:
            pd.DataFrame(rows).to_csv(staging / "comparison.csv", index=False)
            if any(histories.values()):
                plot_history_comparison(histories, staging / "history_comparison.svg")
        logger.debug(f"Artifacts: {', '.join(list_artifacts(output_dir))}")
    except (ValueError, FileNotFoundError) as e:
        return _exit_code(e)

    if report:
        report(f"{config.name}: solver comparison", rows)
    return exit_code
