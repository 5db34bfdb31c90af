"""
Run configuration: a versioned JSON document parsed into frozen dataclasses.

Relative input paths resolve against the directory of the config file.
Relative output directories resolve against WFTO_OUTPUT_ROOT (default
`outputs`).
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from src.energy.aep_objective import InterpolationKind, InterpolationScheme, ObjectiveError
from src.farm.farm_model import CandidateGrid, GridMode, TurbineSpec, generate_circular_grid, load_grid
from src.solvers.results import GaSettings, MmaSettings
from src.wake.gaussian_wake import WakeParams

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SOLVERS = ("mma", "ga", "brute")

load_dotenv()


class ConfigError(ValueError):
    """Invalid run configuration"""


def output_root() -> Path:
    return Path(os.getenv("WFTO_OUTPUT_ROOT", "outputs"))


def worker_count() -> int:
    raw = os.getenv("WFTO_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"WFTO_WORKERS must be an integer, got {raw!r}")
    return max(1, workers)


@dataclass(frozen=True)
class GridConfig:
    radius: Optional[float] = None
    spacing: Optional[float] = None
    mode: str = GridMode.CENTERED.value
    file: Optional[Path] = None

    def build(self) -> CandidateGrid:
        if self.file is not None:
            return load_grid(self.file)
        return generate_circular_grid(self.radius, self.spacing, self.mode)


@dataclass(frozen=True)
class RunConfig:
    name: str
    grid: GridConfig
    turbine: TurbineSpec
    wake: WakeParams
    wind_rose_path: Path
    n_min: int
    n_max: int
    spacing_factor: float
    scheme: InterpolationScheme
    solver: str
    mma: MmaSettings
    ga: GaSettings
    output_dir: Path
    seed: int = 0
    source_path: Optional[Path] = None
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolve_output_dir(self, override: Optional[Union[str, Path]] = None) -> Path:
        target = Path(override) if override is not None else self.output_dir
        return target if target.is_absolute() else output_root() / target


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def _require(data: Dict[str, Any], key: str, where: str = "config"):
    if key not in data:
        raise ConfigError(f"Missing required key '{key}' in {where}")
    return data[key]


def _parse_grid(data: Dict[str, Any], base: Path) -> GridConfig:
    if "file" in data:
        path = _resolve(base, data["file"])
        if not path.exists():
            raise FileNotFoundError(f"Grid file not found: {path}")
        return GridConfig(file=path)
    radius = float(_require(data, "radius", "grid"))
    spacing = float(_require(data, "spacing", "grid"))
    mode = str(data.get("mode", GridMode.CENTERED.value)).lower()
    if mode not in (GridMode.CENTERED.value, GridMode.OFFSET.value):
        raise ConfigError(f"Grid mode must be 'centered' or 'offset', got '{mode}'")
    if radius <= 0 or spacing <= 0:
        raise ConfigError("Grid radius and spacing must be > 0")
    return GridConfig(radius=radius, spacing=spacing, mode=mode)


def parse_run_config(data: Dict[str, Any], base_dir: Union[str, Path] = ".", source_path: Optional[Path] = None) -> RunConfig:
    """Validate a config dictionary; raises ConfigError or FileNotFoundError"""
    base = Path(base_dir)
    if not isinstance(data, dict):
        raise ConfigError("Config root must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    grid = _parse_grid(_require(data, "grid"), base)

    rose_path = _resolve(base, _require(data, "wind_rose"))
    if not rose_path.exists():
        raise FileNotFoundError(f"Wind rose file not found: {rose_path}")

    n_min = _require(data, "n_min")
    n_max = _require(data, "n_max")
    if not (isinstance(n_min, int) and isinstance(n_max, int)) or n_min < 0:
        raise ConfigError("n_min and n_max must be non-negative integers")
    if n_min > n_max:
        raise ConfigError(f"n_min ({n_min}) must not exceed n_max ({n_max})")

    spacing_factor = float(data.get("spacing_factor", 2.0))
    if spacing_factor <= 0:
        raise ConfigError("spacing_factor must be > 0")

    solver = str(data.get("solver", "mma")).lower()
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}, got '{solver}'")

    try:
        turbine = TurbineSpec.from_dict(data.get("turbine", {}))
        wake = WakeParams(**data.get("wake", {}))
        interp = data.get("interpolation", {})
        scheme = InterpolationScheme(interp.get("kind", "ramp"), float(interp.get("penalty", 0.0)))
        mma = MmaSettings.from_dict(data.get("mma", {}))
        ga_data = dict(data.get("ga", {}))
        ga_data.setdefault("seed", int(data.get("seed", 0)))
        ga = GaSettings.from_dict(ga_data)
    except ConfigError:
        raise
    except (TypeError, ValueError, ObjectiveError) as e:
        raise ConfigError(f"Invalid settings: {e}")

    if scheme.kind == InterpolationKind.SIMP:
        lowest = mma.fixed_q if mma.fixed_q is not None else mma.q_min
        if lowest < 1:
            raise ConfigError(f"SIMP exponents start at 1; the MMA penalty schedule starts at {lowest}")

    name = str(data.get("name", source_path.stem if source_path else "run"))
    return RunConfig(
        name=name,
        grid=grid,
        turbine=turbine,
        wake=wake,
        wind_rose_path=rose_path,
        n_min=n_min,
        n_max=n_max,
        spacing_factor=spacing_factor,
        scheme=scheme,
        solver=solver,
        mma=mma,
        ga=ga,
        output_dir=Path(data.get("output_dir", name)),
        seed=int(data.get("seed", 0)),
        source_path=source_path,
        raw=data,
    )


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}")
    config = parse_run_config(data, base_dir=path.parent, source_path=path)
    logger.info(f"Loaded config '{config.name}' ({config.solver}) from {path}")
    return config
