"""
Run artifacts: layout.csv, result.json, history.csv and the SVG set.

Everything is first written into a staging directory next to the target and
moved into place only when all files exist, so a failed run leaves nothing
behind.
"""

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Union

import numpy as np
import pandas as pd

from src.farm.farm_model import CandidateGrid
from src.solvers.results import SolveResult

logger = logging.getLogger(__name__)

LAYOUT_COLUMNS = ["index", "x", "y", "rho", "selected"]
HISTORY_COLUMNS = ["iteration", "q", "aep_gwh", "max_violation", "step_norm"]


@contextmanager
def staged_output(output_dir: Union[str, Path]) -> Iterator[Path]:
    """
    Yield a staging directory; on clean exit move every staged entry into
    output_dir (replacing same-named entries), on error discard it.
    """
    output_dir = Path(output_dir)
    output_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{output_dir.name}.staging-", dir=output_dir.parent))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        for entry in sorted(staging.iterdir()):
            target = output_dir / entry.name
            if target.is_dir() and entry.is_dir():
                shutil.rmtree(target)
            os.replace(entry, target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def layout_frame(grid: CandidateGrid, result: SolveResult) -> pd.DataFrame:
    return pd.DataFrame({
        "index": np.arange(grid.n_sites),
        "x": grid.x,
        "y": grid.y,
        "rho": np.asarray(result.rho, dtype=float),
        "selected": np.asarray(result.selected, dtype=int),
    })[LAYOUT_COLUMNS]


def write_layout(directory: Path, grid: CandidateGrid, result: SolveResult) -> Path:
    path = Path(directory) / "layout.csv"
    layout_frame(grid, result).to_csv(path, index=False, float_format="%.17g")
    return path


def read_layout(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Layout file not found: {path}")
    df = pd.read_csv(path)
    missing = [c for c in LAYOUT_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"Layout file {path} is missing columns: {missing}")
    if not set(df["selected"].unique()) <= {0, 1}:
        raise ValueError(f"Layout file {path}: 'selected' must be 0 or 1")
    return df.sort_values("index").reset_index(drop=True)


def write_history(directory: Path, result: SolveResult) -> Path:
    path = Path(directory) / "history.csv"
    pd.DataFrame(result.history_records(), columns=HISTORY_COLUMNS).to_csv(path, index=False, float_format="%.17g")
    return path


def write_result_json(directory: Path, result: SolveResult, config_hash: str, extra: Dict[str, Any] = None) -> Path:
    path = Path(directory) / "result.json"
    payload = result.summary()
    payload["config_hash"] = config_hash
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    return path


def list_artifacts(directory: Union[str, Path]) -> List[str]:
    return sorted(p.name for p in Path(directory).iterdir())
