# multilayer_onn/calibration/measurement.py
# Purpose: Per-weight and per-neuron calibration, neuron exclusion and weight transfer

"""
Module: measurement.py
Purpose: Measure a simulated stage one weight at a time, decide which neurons are usable and
rescale trained weights by the inverse of the measured response.
"""

import json
import os
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from multilayer_onn.calibration.system import SimulatedSystem
from multilayer_onn.errors import (
    CoverageError,
    DivisionGuardError,
    FormatError,
    InfeasibleCalibrationError,
    InvalidArgumentError,
    ShapeError,
)
from multilayer_onn.utils.logger import get_logger, log_stage_summary
from multilayer_onn.utils.metrics import metrics_collector

logger = get_logger(__name__)

CALIBRATION_VERSION = 1
DEFAULT_GAIN_TOLERANCE = 0.3
DEFAULT_OFFSET_TOLERANCE = 0.1
# Step probes for neuron gain/offset, in units of full-scale detector power.
STEP_LOW = 0.5
STEP_HIGH = 1.0


@dataclass
class CalibrationMap:
    """
    Measured response of one stage.

    Attributes:
        weight_gain (np.ndarray): (n, p) open-window response relative to the stage mean.
        extinction (np.ndarray): (n, p) closed/open response ratio.
        neuron_gain (np.ndarray): (m,) measured neuron gains.
        neuron_offset (np.ndarray): (m,) measured neuron offsets.
        usable (np.ndarray): (m,) neurons kept after exclusion.
    """

    weight_gain: np.ndarray
    extinction: np.ndarray
    neuron_gain: np.ndarray
    neuron_offset: np.ndarray
    usable: np.ndarray

    def __post_init__(self) -> None:
        self.weight_gain = np.asarray(self.weight_gain, dtype=float)
        self.extinction = np.asarray(self.extinction, dtype=float)
        self.neuron_gain = np.asarray(self.neuron_gain, dtype=float)
        self.neuron_offset = np.asarray(self.neuron_offset, dtype=float)
        self.usable = np.asarray(self.usable, dtype=bool)
        n, p = self.weight_gain.shape
        if self.extinction.shape != (n, p) or p % 2:
            raise ShapeError("Extinction map must match the (n, 2m) weight-gain map", module="calibration")
        if any(v.shape != (p // 2,) for v in (self.neuron_gain, self.neuron_offset, self.usable)):
            raise ShapeError(f"Neuron vectors must have length {p // 2}", module="calibration")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.weight_gain.shape

    def usable_columns(self) -> np.ndarray:
        """Boolean (p,) mask; detector columns 2k and 2k+1 follow neuron k."""
        return np.repeat(self.usable, 2)


@dataclass(frozen=True)
class ProbePlan:
    """Ordered single-weight probes (emitter i, detector j)."""

    pairs: Tuple[Tuple[int, int], ...]

    @classmethod
    def full(cls, n: int, p: int) -> "ProbePlan":
        return cls(tuple((i, j) for i in range(n) for j in range(p)))

    def missing(self, n: int, p: int) -> List[Tuple[int, int]]:
        covered = set(self.pairs)
        return [(i, j) for i in range(n) for j in range(p) if (i, j) not in covered]


def measure_weight_response(
    system: SimulatedSystem,
    plan: Optional[ProbePlan] = None,
    seed: int = 0,
    threads: Optional[int] = None,
    run_id: Optional[str] = None,
    shifts: Optional[np.ndarray] = None,
) -> CalibrationMap:
    """
    Probe every weight and neuron of a simulated stage.

    Each weight is read with only its window open (full scale) and then closed; the stage mean of
    the open readings is the reference for weight_gain. Neuron k is driven through its positive
    detector at half and full scale: g = (a_full - a_half) / 0.5, o = a_half - 0.5 * g.

    Args:
        system (SimulatedSystem): Stage to calibrate.
        plan (Optional[ProbePlan]): Probe order; defaults to every (i, j).
        seed (int): Seed for ray tracing and probe noise.
        threads (Optional[int]): Worker threads for raytraced probing.
        run_id (Optional[str]): Run ID for log records.
        shifts (Optional[np.ndarray]): (n, p, 2) window shifts the stage is probed at.

    Returns:
        CalibrationMap: All neurons marked usable; see exclude_neurons.
    """
    n, p = system.shape
    plan = plan or ProbePlan.full(n, p)
    missing = plan.missing(n, p)
    if missing:
        raise CoverageError(missing)

    start = time.time()
    optical = system.open_window_response(seed, shifts, threads=threads)
    open_reading = system.read(system.weight_gain * optical, seed, 0)
    closed_reading = system.read(system.weight_gain * system.extinction * optical, seed, 1)
    rows, cols = np.array(plan.pairs).T
    probed = np.zeros((n, p), dtype=bool)
    probed[rows, cols] = True

    reference = float(np.mean(open_reading[probed]))
    if reference <= 0:
        raise InfeasibleCalibrationError("No probed weight transmits any light")
    weight_gain = np.where(probed, open_reading / reference, 0.0)
    extinction = np.divide(closed_reading, open_reading, out=np.zeros((n, p)), where=open_reading > 0)
    extinction = np.clip(extinction, 0.0, np.nextafter(1.0, 0.0))

    m = system.n_neurons
    zeros = np.zeros(m)
    a_low = system.read(system.neuron_output(np.full(m, STEP_LOW), zeros), seed, 2)
    a_high = system.read(system.neuron_output(np.full(m, STEP_HIGH), zeros), seed, 3)
    neuron_gain = (a_high - a_low) / (STEP_HIGH - STEP_LOW)
    neuron_offset = a_low - STEP_LOW * neuron_gain

    metrics_collector.record_probes(2 * len(plan.pairs) + 2 * m)
    log_stage_summary("calibration_probe", time.time() - start, run_id=run_id, probes=len(plan.pairs), neurons=m, mode=system.mode)
    return CalibrationMap(weight_gain, extinction, neuron_gain, neuron_offset, np.ones(m, dtype=bool))


def exclude_neurons(
    cal: CalibrationMap,
    gain_tolerance: float = DEFAULT_GAIN_TOLERANCE,
    offset_tolerance: float = DEFAULT_OFFSET_TOLERANCE,
) -> np.ndarray:
    """
    Usable-neuron mask.

    A neuron is excluded when its gain deviates from the median gain by more than
    gain_tolerance (relative) or when |offset| exceeds offset_tolerance.

    Args:
        cal (CalibrationMap): Measured map.
        gain_tolerance (float): Relative gain tolerance.
        offset_tolerance (float): Absolute offset tolerance (full-scale units).

    Returns:
        np.ndarray: Boolean (m,) mask.
    """
    if gain_tolerance < 0 or offset_tolerance < 0:
        raise InvalidArgumentError("Tolerances must be nonnegative", module="calibration")
    median = float(np.median(cal.neuron_gain))
    gain_ok = np.abs(cal.neuron_gain - median) <= gain_tolerance * abs(median)
    offset_ok = np.abs(cal.neuron_offset) <= offset_tolerance
    usable = gain_ok & offset_ok & (cal.neuron_gain > 0)
    if not usable.any():
        raise InfeasibleCalibrationError(
            f"All {len(usable)} neurons excluded (gain tolerance {gain_tolerance}, offset tolerance {offset_tolerance})"
        )
    excluded = np.flatnonzero(~usable)
    if excluded.size:
        logger.info("Excluded %d neurons", excluded.size, extra={"neurons": excluded.tolist()})
    return usable


def transfer_weights(
    weights: np.ndarray,
    cal: CalibrationMap,
    w_max: float = 1.0,
    anchor: str = "median",
) -> np.ndarray:
    """
    Pre-compensate trained weights for the measured per-weight response.

    w'_ij = w_ij * anchor(weight_gain) / weight_gain_ij on usable columns, clamped to [0, w_max];
    columns of excluded neurons are zeroed.

    Args:
        weights (np.ndarray): (n, p) trained weights.
        cal (CalibrationMap): Measured map with usable flags.
        w_max (float): Upper clamp.
        anchor (str): 'median' or 'mean' of the usable gains.

    Returns:
        np.ndarray: Mask-ready weights.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != cal.shape:
        raise ShapeError(f"Weights {w.shape} do not match calibration {cal.shape}", module="calibration")
    if anchor not in ("median", "mean"):
        raise InvalidArgumentError(f"Unknown normalization anchor '{anchor}'", module="calibration")
    cols = cal.usable_columns()
    gains = cal.weight_gain[:, cols]
    if gains.size and np.any(gains <= 0):
        bad = [tuple(int(v) for v in ij) for ij in np.argwhere(cal.weight_gain * cols <= 0) if cols[ij[1]]]
        raise DivisionGuardError(f"Zero measured gain on {len(bad)} usable weights, e.g. {bad[:5]}", weights=bad[:20])
    out = np.zeros_like(w)
    if gains.size:
        ref = float(np.median(gains) if anchor == "median" else np.mean(gains))
        out[:, cols] = w[:, cols] * (ref / gains)
    return np.clip(out, 0.0, w_max)


def save_calibration(cal: CalibrationMap, path: str, metadata: Optional[dict] = None) -> str:
    """Write a CalibrationMap as JSON (format version 1)."""
    doc = {
        "format_version": CALIBRATION_VERSION,
        "weight_gain": cal.weight_gain.tolist(),
        "extinction": cal.extinction.tolist(),
        "neuron_gain": cal.neuron_gain.tolist(),
        "neuron_offset": cal.neuron_offset.tolist(),
        "usable": cal.usable.tolist(),
        "metadata": metadata or {},
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
    return path


def load_calibration(path: str) -> CalibrationMap:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format_version") != CALIBRATION_VERSION:
        raise FormatError(f"{path}: unsupported calibration version {doc.get('format_version')}", module="calibration")
    try:
        return CalibrationMap(
            doc["weight_gain"], doc["extinction"], doc["neuron_gain"], doc["neuron_offset"], doc["usable"]
        )
    except KeyError as e:
        raise FormatError(f"{path}: missing calibration field {e}", module="calibration")
