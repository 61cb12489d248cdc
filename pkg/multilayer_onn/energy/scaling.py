# multilayer_onn/energy/scaling.py
# Purpose: Scaling scans and the diffraction-bounded array size

"""
Module: scaling.py
Purpose: Tabulate how amortization, efficiency and detector power requirements scale with
array size, depth, clock and bandwidth, and find the array size at which diffraction from
ever smaller weight windows starts spilling light off the target photodiode.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from multilayer_onn.electronics.noise import NoiseSpec, min_optical_power
from multilayer_onn.energy.model import AcceleratorConfig, EnergyModel, ops_per_cycle, ops_per_readin, perf_per_watt
from multilayer_onn.errors import InvalidArgumentError, ResourceError
from multilayer_onn.geometry.layout import DetectorGrid, EmitterGrid, MaskPlane, StageGeometry, compile_mask, window_extent
from multilayer_onn.optics.diffraction import SourceSpec, angular_spectrum_propagate
from multilayer_onn.utils.logger import get_logger, log_stage_summary

logger = get_logger(__name__)

DEFAULT_GRID_SIZES = (8, 12, 16, 20, 24, 28, 32, 36, 40, 48, 56, 64)


def readin_table(grid_sizes: Iterable[int], layer_counts: Iterable[int], model: EnergyModel = EnergyModel()) -> pd.DataFrame:
    """Operations per cycle and per converted sample over (grid size, depth)."""
    rows = []
    for n in grid_sizes:
        for layers in layer_counts:
            cfg = AcceleratorConfig.square(int(n), int(layers))
            rows.append({
                "grid_size": int(n),
                "layers": int(layers),
                "ops_per_cycle": ops_per_cycle(cfg, model),
                "ops_per_readin": ops_per_readin(cfg, model),
            })
    return pd.DataFrame(rows)


def perf_vs_grid_table(grid_sizes: Iterable[int], model: EnergyModel = EnergyModel(), layers: int = 1) -> pd.DataFrame:
    rows = []
    for n in grid_sizes:
        value = perf_per_watt(AcceleratorConfig.square(int(n), layers), model)
        rows.append({"grid_size": int(n), "clock_hz": model.clock_hz, "ops_per_w": value, "tops_per_w": value / 1e12})
    return pd.DataFrame(rows)


def perf_vs_clock_table(clocks: Iterable[float], grid_size: int = 32, model: EnergyModel = EnergyModel(), layers: int = 1) -> pd.DataFrame:
    cfg = AcceleratorConfig.square(grid_size, layers)
    rows = []
    for clock in clocks:
        value = perf_per_watt(cfg, model.at_clock(float(clock)))
        rows.append({"grid_size": grid_size, "clock_hz": float(clock), "ops_per_w": value, "tops_per_w": value / 1e12})
    return pd.DataFrame(rows)


def min_power_table(bandwidths: Iterable[float], noise: NoiseSpec = NoiseSpec(), snr_target: float = 10.0) -> pd.DataFrame:
    rows = [
        {"bandwidth_hz": float(b), "min_optical_power_w": min_optical_power(float(b), noise, snr_target)}
        for b in bandwidths
    ]
    return pd.DataFrame(rows)


def write_table(frame: pd.DataFrame, path: str) -> str:
    """CSV with header row, comma separator and '.' decimals."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False)
    return path


@dataclass(frozen=True)
class DiffractionSweep:
    """
    Representative stage scaled at fixed board size.

    For grid size N: detector pitch board/N, active side fill * pitch, emitter die
    die_fraction * pitch, equal LED-mask and mask-PD distances. The solver samples each window
    with samples_per_window pixels per side.
    """

    board_size: float = 24000.0
    fill: float = 0.5
    distance: float = 10000.0
    die_fraction: float = 1e-3
    guard: float = 0.1
    wavelength: float = 0.525
    grid_sizes: Sequence[int] = DEFAULT_GRID_SIZES
    threshold: float = 0.1
    realizations: int = 4
    samples_per_window: int = 16
    max_grid: int = 4096

    def __post_init__(self) -> None:
        if self.board_size <= 0 or self.distance <= 0 or self.wavelength <= 0:
            raise InvalidArgumentError("Board size, distance and wavelength must be positive", module="energy")
        if not 0 < self.fill <= 1 or not 0 < self.die_fraction < self.fill:
            raise InvalidArgumentError("Need 0 < die_fraction < fill <= 1", module="energy")
        if not 0 < self.threshold < 1:
            raise InvalidArgumentError("threshold must be in (0, 1)", module="energy")
        if self.samples_per_window < 2 or not self.grid_sizes:
            raise InvalidArgumentError("Need samples_per_window >= 2 and at least one grid size", module="energy")


@dataclass
class ArrayLimitResult:
    limit: Optional[int]
    curve: pd.DataFrame


def representative_stage(grid_size: int, sweep: DiffractionSweep) -> StageGeometry:
    """One emitter, one detector and a mask sampled at the solver pitch."""
    pitch = sweep.board_size / grid_size
    die = sweep.die_fraction * pitch
    active = sweep.fill * pitch
    emitters = EmitterGrid(1, 1, pitch, die)
    detectors = DetectorGrid(1, 1, pitch, active)
    probe = StageGeometry(emitters, detectors, MaskPlane(1.0, (1, 1)), sweep.distance, sweep.distance)
    dx = window_extent(probe, sweep.guard) / sweep.samples_per_window
    need = max(2.5 * pitch / dx, sweep.wavelength * sweep.distance / dx ** 2)
    n = 1 << int(np.ceil(np.log2(need)))
    if n > sweep.max_grid:
        raise ResourceError(
            f"Grid size {grid_size} needs a {n}x{n} solver grid, above the {sweep.max_grid} limit",
            required_grid_size=n,
        )
    return StageGeometry(emitters, detectors, MaskPlane(dx, (n, n)), sweep.distance, sweep.distance)


def diffraction_array_limit(
    sweep: DiffractionSweep = DiffractionSweep(),
    seed: int = 0,
    threads: Optional[int] = None,
    run_id: Optional[str] = None,
) -> ArrayLimitResult:
    """
    Leakage off the target photodiode versus grid size.

    Args:
        sweep (DiffractionSweep): Scaling rule and sweep points.
        seed (int): Solver seed.
        threads (Optional[int]): Workers across grid sizes.
        run_id (Optional[str]): Run ID for log records.

    Returns:
        ArrayLimitResult: First grid size whose leakage exceeds the threshold (None when no point
        does) and the per-size curve.
    """
    # fail fast before any solver work
    geometries = [representative_stage(int(n), sweep) for n in sweep.grid_sizes]

    def run(geom: StageGeometry):
        start = time.time()
        mask = compile_mask(np.ones((1, 1)), geom, sweep.guard)
        spec = SourceSpec(grid_pitch=geom.mask.pixel_pitch, grid_size=geom.mask.width)
        report = angular_spectrum_propagate(spec, geom, mask, sweep.wavelength, sweep.realizations, seed)
        log_stage_summary(
            "diffraction_sweep_point", time.time() - start, run_id=run_id,
            pd_pitch_um=geom.detectors.pitch, leakage=report.leakage_fraction,
        )
        return report

    if threads is None or threads <= 1:
        reports = [run(g) for g in geometries]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run, geometries))

    curve = pd.DataFrame({
        "grid_size": [int(n) for n in sweep.grid_sizes],
        "pd_pitch_um": [g.detectors.pitch for g in geometries],
        "solver_grid": [g.mask.width for g in geometries],
        "leakage_fraction": [r.leakage_fraction for r in reports],
        "blur_radius_um": [r.blur_radius for r in reports],
    })
    over = curve[curve["leakage_fraction"] > sweep.threshold]
    limit = None if over.empty else int(over["grid_size"].iloc[0])
    logger.info("Diffraction array limit: %s", limit, extra={"threshold": sweep.threshold})
    return ArrayLimitResult(limit=limit, curve=curve)
