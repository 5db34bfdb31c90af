"""
Annual energy production of a density-weighted wind farm and its gradient.

Indexing used throughout: i = wind direction bin, j = site receiving wakes,
k / m = site generating wakes. Densities are interpolated first (rho -> rho_t)
and the objective uses rho_t everywhere: in the power sum and in the wake sum.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from src.farm.farm_model import CandidateGrid, TurbineSpec, WindRose, rotate_to_wind_frame
from src.wake.gaussian_wake import DOWNSTREAM_TOLERANCE, DeficitTensor, WakeParams, gaussian_deficit

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760.0
MWH_PER_GWH = 1000.0
# Floor on the total loss inside the gradient only
LOSS_FLOOR = 1e-12
# Fraction of the largest gradient component used as the floor of relative errors
RELATIVE_ERROR_FLOOR = 1e-2
# Effective speeds closer than this to a power-curve breakpoint [m/s] mask a gradient component
BREAKPOINT_WINDOW = 1e-3


class ObjectiveError(ValueError):
    """Inconsistent objective inputs"""


class InterpolationKind(str, Enum):
    RAMP = "ramp"
    SIMP = "simp"
    LINEAR = "linear"


@dataclass(frozen=True)
class InterpolationScheme:
    """
    Density interpolation.

    RAMP:   rho / (1 + q (1 - rho))
    SIMP:   rho ** p
    linear: rho (same as RAMP with q = 0)
    """
    kind: InterpolationKind = InterpolationKind.RAMP
    penalty: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", InterpolationKind(str.lower(self.kind)))
        except ValueError:
            raise ObjectiveError(f"Unknown interpolation scheme: {self.kind}")
        if self.kind == InterpolationKind.RAMP and self.penalty < 0:
            raise ObjectiveError(f"RAMP penalty q must be >= 0, got {self.penalty}")
        if self.kind == InterpolationKind.SIMP and self.penalty < 1:
            raise ObjectiveError(f"SIMP exponent p must be >= 1, got {self.penalty}")

    def with_penalty(self, penalty: float) -> "InterpolationScheme":
        if self.kind == InterpolationKind.LINEAR:
            return self
        return InterpolationScheme(self.kind, penalty)


@dataclass(frozen=True, eq=False)
class DesignVector:
    """Continuous site densities, one per candidate site, each in [0, 1]"""
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 1:
            raise ObjectiveError("Design vector must be 1-D")
        if np.any(~np.isfinite(rho)) or np.any(rho < 0) or np.any(rho > 1):
            raise ObjectiveError("Densities must lie in [0, 1]")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def uniform(cls, n_sites: int, value: float) -> "DesignVector":
        return cls(np.full(n_sites, float(value)))

    def __len__(self) -> int:
        return int(self.rho.size)


@dataclass
class ObjectiveReport:
    aep_gwh: float
    farm_power_mw: np.ndarray  # per direction bin
    gradient: np.ndarray       # d(-AEP)/d(rho), GWh per unit density

    @property
    def objective(self) -> float:
        return -self.aep_gwh


def _as_array(rho: Union[DesignVector, np.ndarray, Iterable[float]]) -> np.ndarray:
    if isinstance(rho, DesignVector):
        return rho.rho
    return np.asarray(rho, dtype=float)


def interpolate(rho, scheme: InterpolationScheme) -> Tuple[np.ndarray, np.ndarray]:
    """Interpolated densities and their derivative with respect to rho"""
    rho = _as_array(rho)
    if np.any(~np.isfinite(rho)) or np.any(rho < 0) or np.any(rho > 1):
        raise ObjectiveError("Densities must lie in [0, 1]")

    if scheme.kind == InterpolationKind.LINEAR:
        return rho.copy(), np.ones_like(rho)
    if scheme.kind == InterpolationKind.SIMP:
        p = scheme.penalty
        if p == 1:
            return rho.copy(), np.ones_like(rho)
        return rho ** p, p * rho ** (p - 1.0)

    q = scheme.penalty
    denom = 1.0 + q * (1.0 - rho)
    return rho / denom, (1.0 + q) / denom ** 2


def _check_tensor(n_sites: int, tensor: DeficitTensor, rose: Optional[WindRose] = None):
    if tensor.n_sites != n_sites:
        raise ObjectiveError(f"Design has {n_sites} sites but the deficit tensor has {tensor.n_sites}")
    if rose is not None and rose.n_bins != tensor.n_bins:
        raise ObjectiveError(f"Wind rose has {rose.n_bins} bins but the deficit tensor has {tensor.n_bins}")


def _total_loss(rho_t: np.ndarray, deficits_sq: np.ndarray) -> np.ndarray:
    # root-sum-square of density-weighted single-wake deficits
    return np.sqrt(deficits_sq @ rho_t)


def effective_speeds(rho_t, tensor: DeficitTensor, direction_index: int, free_stream: float) -> np.ndarray:
    """Per-site effective wind speed for one direction bin"""
    rho_t = np.asarray(rho_t, dtype=float)
    _check_tensor(rho_t.size, tensor)
    loss = _total_loss(rho_t, tensor.squared_deficits[direction_index])
    return free_stream * (1.0 - np.minimum(loss, 1.0))


def turbine_power(speed, turbine: TurbineSpec):
    """
    Power curve [MW] and its derivative with respect to speed.

    Derivative convention at the kinks: cubic-side value at cut-in and rated,
    zero at cut-out.
    """
    v = np.asarray(speed, dtype=float)
    vci, vr, vco, pr = turbine.cut_in_speed, turbine.rated_speed, turbine.cut_out_speed, turbine.rated_power
    span = vr - vci
    cubic = (v >= vci) & (v < vr)
    rated = (v >= vr) & (v < vco)
    ratio = (v - vci) / span
    power = np.where(cubic, pr * ratio ** 3, np.where(rated, pr, 0.0))
    slope_region = (v >= vci) & (v <= vr)
    dpower = np.where(slope_region, 3.0 * pr * (v - vci) ** 2 / span ** 3, 0.0)
    if np.ndim(speed) == 0:
        return float(power), float(dpower)
    return power, dpower


def farm_power(rho_t, tensor: DeficitTensor, rose: WindRose, turbine: TurbineSpec, direction_index: int) -> float:
    """Density-weighted farm power [MW] for one direction bin"""
    rho_t = np.asarray(rho_t, dtype=float)
    _check_tensor(rho_t.size, tensor, rose)
    speeds = effective_speeds(rho_t, tensor, direction_index, rose.speeds[direction_index])
    power, _ = turbine_power(speeds, turbine)
    return float(rho_t @ power)


def aep(rho, scheme: InterpolationScheme, tensor: DeficitTensor, rose: WindRose, turbine: TurbineSpec) -> ObjectiveReport:
    """
    AEP [GWh] at densities rho and the gradient of f = -AEP with respect to rho.
    """
    rho = _as_array(rho)
    _check_tensor(rho.size, tensor, rose)
    rho_t, drho = interpolate(rho, scheme)

    w2 = tensor.squared_deficits                        # (bins, N, N)
    loss = np.sqrt(np.einsum("ijk,k->ij", w2, rho_t))   # (bins, N)
    unclamped = loss < 1.0
    v_inf = rose.speeds[:, None]
    speeds = v_inf * (1.0 - np.minimum(loss, 1.0))
    power, dpower = turbine_power(speeds, turbine)

    farm = power @ rho_t                                 # (bins,)
    scale = HOURS_PER_YEAR / MWH_PER_GWH
    aep_gwh = float(scale * (rose.frequencies @ farm))

    # dV_j/drho_t_m = -V_inf * W[j,m]^2 / (2 L_j) on the unclamped branch
    coeff = np.where(unclamped, rho_t[None, :] * dpower * (-v_inf / (2.0 * np.maximum(loss, LOSS_FLOOR))), 0.0)
    wake_term = np.einsum("ij,ijm->im", coeff, w2)
    dfarm = power + wake_term                            # d P_f^i / d rho_t_m
    daep = scale * (rose.frequencies @ dfarm)
    gradient = -daep * drho

    return ObjectiveReport(aep_gwh=aep_gwh, farm_power_mw=farm, gradient=gradient)


def aep_batch(designs, scheme: InterpolationScheme, tensor: DeficitTensor, rose: WindRose, turbine: TurbineSpec) -> np.ndarray:
    """AEP [GWh] for every row of a (P, N) matrix of designs; no gradients"""
    designs = np.atleast_2d(np.asarray(designs, dtype=float))
    _check_tensor(designs.shape[1], tensor, rose)
    rho_t, _ = interpolate(designs, scheme)
    total = np.zeros(designs.shape[0])
    w2 = tensor.squared_deficits
    for i in range(tensor.n_bins):
        loss = np.sqrt(rho_t @ w2[i].T)
        speeds = rose.speeds[i] * (1.0 - np.minimum(loss, 1.0))
        power, _ = turbine_power(speeds, turbine)
        total += rose.frequencies[i] * np.einsum("pj,pj->p", rho_t, power)
    return total * HOURS_PER_YEAR / MWH_PER_GWH


def simulate_binary_layout(
    grid: CandidateGrid,
    selected,
    rose: WindRose,
    turbine: TurbineSpec,
    params: WakeParams,
) -> float:
    """
    AEP [GWh] of the turbines at the selected sites, computed from scratch:
    absent turbines are removed and every wake is re-derived pairwise.
    """
    mask = np.asarray(selected)
    if mask.shape != (grid.n_sites,) or not np.all(np.isin(mask, (0, 1))):
        raise ObjectiveError("selected must be a 0/1 mask with one entry per candidate site")
    coords = grid.coordinates[mask.astype(bool)]
    total_mw = 0.0
    for i, direction in enumerate(rose.directions):
        downwind, crosswind = rotate_to_wind_frame(coords, direction)
        farm_mw = 0.0
        for j in range(coords.shape[0]):
            dx = downwind[j] - downwind
            dy = crosswind[j] - crosswind
            upstream = dx > DOWNSTREAM_TOLERANCE
            loss_sq = 0.0
            if np.any(upstream):
                deficits = gaussian_deficit(dx[upstream], dy[upstream], np.zeros(int(upstream.sum())), turbine, params)
                loss_sq = float(np.sum(np.atleast_1d(deficits) ** 2))
            speed = rose.speeds[i] * (1.0 - min(np.sqrt(loss_sq), 1.0))
            farm_mw += turbine_power(speed, turbine)[0]
        total_mw += rose.frequencies[i] * farm_mw
    return total_mw * HOURS_PER_YEAR / MWH_PER_GWH


def _near_breakpoint(base: np.ndarray, minus: np.ndarray, plus: np.ndarray, turbine: TurbineSpec, window: float) -> bool:
    """True when a speed moved by the stencil crosses a breakpoint or sits within window of one"""
    moved = minus != plus
    if not np.any(moved):
        return False
    base, minus, plus = base[moved], minus[moved], plus[moved]
    for bp in (turbine.cut_in_speed, turbine.rated_speed, turbine.cut_out_speed):
        if np.any((minus < bp) != (plus < bp)):
            return True
        distance = np.minimum(np.abs(base - bp), np.minimum(np.abs(minus - bp), np.abs(plus - bp)))
        if np.any(distance < window):
            return True
    return False


def check_gradient(
    rho,
    scheme: InterpolationScheme,
    tensor: DeficitTensor,
    rose: WindRose,
    turbine: TurbineSpec,
    step: float = 1e-6,
    breakpoint_window: float = BREAKPOINT_WINDOW,
) -> dict:
    """
    Compare the analytic gradient of f = -AEP with central finite differences.

    A component is masked out (valid = False) when its perturbation moves
    an effective speed that crosses a power-curve breakpoint or lies within
    breakpoint_window of one, at the base point or either stencil point.

    relative_error uses max(|fd_m|, 1e-2 * max|fd|) as denominator and
    floored marks the components where the floor was used;
    pure_relative_error divides by |fd_m| alone.
    """
    rho = _as_array(rho)
    n = rho.size
    report = aep(rho, scheme, tensor, rose, turbine)

    plus = np.tile(rho, (n, 1)) + step * np.eye(n)
    minus = np.tile(rho, (n, 1)) - step * np.eye(n)
    if np.any(plus > 1) or np.any(minus < 0):
        raise ObjectiveError("Finite-difference step leaves [0, 1]; use interior densities")
    fd = -(aep_batch(plus, scheme, tensor, rose, turbine) - aep_batch(minus, scheme, tensor, rose, turbine)) / (2.0 * step)

    rt_base, _ = interpolate(rho, scheme)
    base_speeds = [effective_speeds(rt_base, tensor, i, rose.speeds[i]) for i in range(tensor.n_bins)]
    valid = np.ones(n, dtype=bool)
    for m in range(n):
        rt_plus, _ = interpolate(plus[m], scheme)
        rt_minus, _ = interpolate(minus[m], scheme)
        for i in range(tensor.n_bins):
            sp = effective_speeds(rt_plus, tensor, i, rose.speeds[i])
            sm = effective_speeds(rt_minus, tensor, i, rose.speeds[i])
            if _near_breakpoint(base_speeds[i], sm, sp, turbine, breakpoint_window):
                valid[m] = False
                break

    # components that nearly cancel are measured against a small fraction of the largest one
    floor = RELATIVE_ERROR_FLOOR * max(float(np.max(np.abs(fd))), 1e-12)
    difference = np.abs(report.gradient - fd)
    rel_error = difference / np.maximum(np.abs(fd), floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        pure_error = np.where(fd != 0.0, difference / np.abs(fd), np.where(difference == 0.0, 0.0, np.inf))
    floored = np.abs(fd) < floor
    if valid.any():
        logger.debug(f"Gradient check: max rel error {rel_error[valid].max():.3e} "
                     f"(pure {pure_error[valid].max():.3e}, {int(floored[valid].sum())} floored), "
                     f"{int((~valid).sum())} masked components")
    else:
        logger.debug("Gradient check: every component is masked")
    return {
        "analytic": report.gradient,
        "finite_difference": fd,
        "relative_error": rel_error,
        "pure_relative_error": pure_error,
        "floored": floored,
        "valid": valid,
    }
