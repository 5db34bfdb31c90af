"""
SVG figures for a run: layout, flow field, convergence history, density
histogram and interpolation curves.

Output is byte-for-byte reproducible: fixed hash salt, no date metadata.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from src.energy.aep_objective import InterpolationKind, InterpolationScheme, interpolate  # noqa: E402
from src.farm.farm_model import CandidateGrid  # noqa: E402
from src.reporting.flow_field import FlowField  # noqa: E402
from src.solvers.results import IterationRecord  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "wind-farm-layout"
plt.rcParams["svg.fonttype"] = "path"

HISTOGRAM_BINS = 20


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Saved figure {path}")
    return path


def _draw_farm(ax, grid: CandidateGrid, selected: np.ndarray):
    ax.add_patch(Circle((0.0, 0.0), grid.boundary_radius, fill=False, color="black", linewidth=1.0))
    free = ~selected
    ax.plot(grid.x[free], grid.y[free], linestyle="none", marker=".", markersize=2, color="grey")


def plot_layout(grid: CandidateGrid, selected, min_distance: float, path: Union[str, Path], title: str = "") -> Path:
    """Boundary, candidate sites, selected turbines and their spacing circles"""
    selected = np.asarray(selected).astype(bool)
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_farm(ax, grid, selected)
    for x, y in zip(grid.x[selected], grid.y[selected]):
        ax.add_patch(Circle((x, y), min_distance, fill=False, color="red", linewidth=0.6))
    ax.plot(grid.x[selected], grid.y[selected], linestyle="none", marker="o", markersize=4, color="blue")

    margin = max(min_distance, 0.05 * grid.boundary_radius)
    lim = grid.boundary_radius + margin
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or f"{int(selected.sum())} turbines")
    return _save(fig, path)


def plot_flow_field(field: FlowField, grid: CandidateGrid, selected, path: Union[str, Path]) -> Path:
    selected = np.asarray(selected).astype(bool)
    fig, ax = plt.subplots(figsize=(7, 6))
    mesh = ax.pcolormesh(field.xs, field.ys, field.speeds, shading="nearest", cmap="viridis",
                         vmin=0.0, vmax=field.free_stream)
    fig.colorbar(mesh, ax=ax, label="Wind speed [m/s]")
    ax.add_patch(Circle((0.0, 0.0), grid.boundary_radius, fill=False, color="white", linewidth=1.0))
    ax.plot(grid.x[selected], grid.y[selected], linestyle="none", marker="o", markersize=3, color="red")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"Flow field, wind from {field.direction:g} deg")
    return _save(fig, path)


def plot_history(history: Sequence[IterationRecord], path: Union[str, Path], label: str = "AEP") -> Path:
    if len(history) == 0:
        raise ValueError("Cannot plot an empty history")
    iterations = [record.iteration for record in history]
    values = [record.aep_gwh for record in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iterations, values, color="tab:blue", linewidth=1.2, label=label)
    ax.set_xlabel("Iteration")
    ax.set_ylabel("AEP [GWh]")
    ax.grid(True, linewidth=0.3)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_history_comparison(histories: Mapping[str, Sequence[IterationRecord]], path: Union[str, Path]) -> Path:
    """AEP against iteration for several solvers on one axis; single-record histories show as a marker"""
    series = {label: history for label, history in histories.items() if len(history)}
    if not series:
        raise ValueError("Cannot plot a comparison without any history")
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, history in series.items():
        iterations = [record.iteration for record in history]
        values = [record.aep_gwh for record in history]
        ax.plot(iterations, values, linewidth=1.2, marker="o" if len(history) == 1 else None, label=label)
    ax.set_xlabel("Iteration")
    ax.set_ylabel("AEP [GWh]")
    ax.grid(True, linewidth=0.3)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_density_histogram(rho, path: Union[str, Path]) -> Path:
    rho = np.asarray(rho, dtype=float)
    if rho.size == 0:
        raise ValueError("Cannot plot an empty density vector")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(rho, bins=HISTOGRAM_BINS, range=(0.0, 1.0), color="tab:green", edgecolor="black", linewidth=0.5)
    ax.set_xlabel("Density")
    ax.set_ylabel("Sites")
    return _save(fig, path)


def density_histogram_counts(rho) -> np.ndarray:
    counts, _ = np.histogram(np.asarray(rho, dtype=float), bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return counts


def plot_interpolation_curves(
    path: Union[str, Path],
    penalties: Iterable[float] = (0.0, 1.0, 3.0, 5.0, 10.0),
    kinds: Iterable[Union[str, InterpolationKind]] = (InterpolationKind.RAMP,),
) -> Path:
    """Interpolated density against density for several penalties"""
    rho = np.linspace(0.0, 1.0, 201)
    fig, ax = plt.subplots(figsize=(5, 5))
    labels: List[str] = []
    for kind in kinds:
        kind = InterpolationKind(str.lower(kind))
        for penalty in penalties:
            if kind == InterpolationKind.SIMP and penalty < 1:
                continue
            scheme = InterpolationScheme(kind, penalty)
            values, _ = interpolate(rho, scheme)
            label = f"{kind.value} {'p' if kind == InterpolationKind.SIMP else 'q'}={penalty:g}"
            ax.plot(rho, values, linewidth=1.0, label=label)
            labels.append(label)
    ax.set_xlabel("Density")
    ax.set_ylabel("Interpolated density")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    if labels:
        ax.legend(loc="upper left", fontsize=8)
    return _save(fig, path)
