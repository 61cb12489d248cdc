# multilayer_onn/geometry/crosstalk.py
# Purpose: Detector-level crosstalk matrices from the stage geometry

"""
Module: crosstalk.py
Purpose: Entry (j, k) of a crosstalk matrix is the fraction of the power passing window (i, j)
(emitted by its own LED i) that lands on detector k, averaged over i.

Two estimators:
    crosstalk_matrix   Monte Carlo ray tracing through the compiled window layout.
    overlap_crosstalk  Separable overlap of the geometric spot with each active area; fast
                       enough to recompute for every training batch.
"""

import time
from typing import Optional, Sequence

import numpy as np

from multilayer_onn.errors import InvalidArgumentError, ShapeError
from multilayer_onn.geometry.layout import DEFAULT_GUARD, StageGeometry, WeightMask, window_pixels
from multilayer_onn.optics.raytrace import DEFAULT_BATCH_SIZE, reachable_cone, trace_batch
from multilayer_onn.utils.logger import get_logger, log_stage_summary
from multilayer_onn.utils.metrics import metrics_collector
from multilayer_onn.utils.parallel import batch_sizes, run_tasks
from multilayer_onn.utils.seeding import STREAM_RAYTRACE, derive_rng

logger = get_logger(__name__)


def crosstalk_matrix(
    geom: StageGeometry,
    mask: WeightMask,
    rays_per_led: int,
    seed: int,
    threads: Optional[int] = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """
    Monte Carlo detector crosstalk matrix.

    Windows are treated as fully open; only the layout of `mask` matters.

    Args:
        geom (StageGeometry): Stage geometry.
        mask (WeightMask): Compiled mask whose windows are traced.
        rays_per_led (int): Rays per emitter.
        seed (int): Run seed.
        threads (Optional[int]): Worker threads.

    Returns:
        np.ndarray: (p, p) matrix; rows sum to at most 1.
    """
    if rays_per_led < 1:
        raise InvalidArgumentError(f"rays_per_led must be >= 1, got {rays_per_led}", module="geometry")
    n, p = geom.n_in, geom.n_out
    if mask.shape != (n, p):
        raise ShapeError(f"Mask windows {mask.shape} do not match geometry {(n, p)}", module="geometry")

    start = time.time()
    labels = mask.label_raster()
    leds = geom.emitters.positions()
    sizes = batch_sizes(rays_per_led, batch_size)
    tasks = [(i, b, size) for i in range(n) for b, size in enumerate(sizes)]
    angles = [reachable_cone(geom, leds[i]) for i in range(n)]

    def run(task):
        i, b, size = task
        # same streams as raytrace_propagate, so both see identical rays
        rng = derive_rng(seed, STREAM_RAYTRACE, i, b)
        hits = trace_batch(geom, leds[i], size, rng, angles[i])
        lab = np.where(hits.in_mask, labels[hits.mask_row, hits.mask_col], -1)
        own = (lab >= 0) & (lab // p == i)
        j = lab[own] % p
        passed = np.bincount(j, minlength=p).astype(float)
        landed = hits.detector[own]
        hit = landed >= 0
        counts = np.zeros((p, p))
        np.add.at(counts, (j[hit], landed[hit]), 1.0)
        return passed, counts

    results = run_tasks(run, tasks, threads)
    total = np.zeros((p, p))
    support = np.zeros(p)
    per_led_pass = np.zeros(p)
    per_led_counts = np.zeros((p, p))
    current = 0
    for (i, _, _), (passed, counts) in zip(tasks, results):
        if i != current:
            total, support = _fold(total, support, per_led_counts, per_led_pass)
            per_led_pass = np.zeros(p)
            per_led_counts = np.zeros((p, p))
            current = i
        per_led_pass += passed
        per_led_counts += counts
    total, support = _fold(total, support, per_led_counts, per_led_pass)

    matrix = np.divide(total, support[:, None], out=np.zeros_like(total), where=support[:, None] > 0)
    metrics_collector.record_rays(n * rays_per_led)
    log_stage_summary("crosstalk_matrix", time.time() - start, emitters=n, rays_per_led=rays_per_led)
    return matrix


def _fold(total: np.ndarray, support: np.ndarray, counts: np.ndarray, passed: np.ndarray):
    seen = passed > 0
    frac = np.zeros_like(counts)
    frac[seen] = counts[seen] / passed[seen, None]
    return total + frac, support + seen


def _trapezoid_cdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    """CDF of the sum of two centred uniforms with widths a and b."""
    x = np.asarray(x, dtype=float)
    lo, hi = min(a, b), max(a, b)
    if hi <= 0:
        return (x >= 0).astype(float)
    if lo <= 1e-9 * hi:
        return np.clip(x / hi + 0.5, 0.0, 1.0)

    def ramp(u):
        u = np.maximum(u, 0.0)
        return 0.5 * u * u

    s, d = (a + b) / 2.0, (a - b) / 2.0
    return (ramp(x + s) - ramp(x + d) - ramp(x - d) + ramp(x - s)) / (a * b)


def _axis_overlap(centres: np.ndarray, active: float, spot: float, blur: float, shift: float) -> np.ndarray:
    target = centres + shift
    rel_hi = centres[None, :] + active / 2.0 - target[:, None]
    rel_lo = centres[None, :] - active / 2.0 - target[:, None]
    return _trapezoid_cdf(rel_hi, spot, blur) - _trapezoid_cdf(rel_lo, spot, blur)


def overlap_crosstalk(
    geom: StageGeometry,
    shift: Sequence[float] = (0.0, 0.0),
    window_px: Optional[int] = None,
    guard: float = DEFAULT_GUARD,
) -> np.ndarray:
    """
    Fast separable crosstalk approximation.

    Per axis the window image on the detector plane is a box of width M * window convolved
    with a box of width (M - 1) * die, i.e. a trapezoid; its intended position is displaced by
    `shift` detector pitches. Entry (j, k) is the product over axes of the trapezoid mass
    inside detector k's active interval.

    Args:
        geom (StageGeometry): Stage geometry.
        shift (Sequence[float]): (dx, dy) window displacement in detector pitches.
        window_px (Optional[int]): Window side in pixels; derived from guard when omitted.
        guard (float): Window guard fraction.

    Returns:
        np.ndarray: (p, p) matrix.
    """
    M = geom.magnification
    det = geom.detectors
    if window_px is None:
        window_px = window_pixels(geom, guard)
    spot = M * window_px * geom.mask.pixel_pitch
    blur = (M - 1.0) * geom.emitters.die_size
    xs = (np.arange(det.cols) - (det.cols - 1) / 2.0) * det.pitch
    ys = ((det.rows - 1) / 2.0 - np.arange(det.rows)) * det.pitch
    fx = _axis_overlap(xs, det.active_size, spot, blur, shift[0] * det.pitch)
    fy = _axis_overlap(ys, det.active_size, spot, blur, shift[1] * det.pitch)
    return np.kron(fy, fx)


def window_coupling(geom: StageGeometry, offsets_px: np.ndarray, guard: float = DEFAULT_GUARD) -> np.ndarray:
    """
    Per-window spill of the geometric spot onto every detector.

    A window displaced by (drow, dcol) mask pixels moves its spot by M * pitch * (dcol, -drow)
    on the detector plane. Same trapezoid model as overlap_crosstalk.

    Args:
        geom (StageGeometry): Stage geometry.
        offsets_px (np.ndarray): (n, p, 2) window displacements (drow, dcol) in pixels; may be fractional.
        guard (float): Window guard fraction.

    Returns:
        np.ndarray: (n, p, p) fraction of window (i, j)'s spot landing on detector k.
    """
    offsets = np.asarray(offsets_px, dtype=float)
    if offsets.ndim != 3 or offsets.shape[1:] != (geom.n_out, 2):
        raise ShapeError(f"Offsets must have shape (n, p, 2), got {offsets.shape}", module="geometry")
    M = geom.magnification
    det = geom.detectors
    spot = M * window_pixels(geom, guard) * geom.mask.pixel_pitch
    blur = (M - 1.0) * geom.emitters.die_size
    step = M * geom.mask.pixel_pitch
    pds = det.positions()
    half = det.active_size / 2.0
    cx = pds[None, :, 0] + step * offsets[..., 1]
    cy = pds[None, :, 1] - step * offsets[..., 0]
    xs, ys = pds[:, 0], pds[:, 1]
    fx = _trapezoid_cdf(xs + half - cx[..., None], spot, blur) - _trapezoid_cdf(xs - half - cx[..., None], spot, blur)
    fy = _trapezoid_cdf(ys + half - cy[..., None], spot, blur) - _trapezoid_cdf(ys - half - cy[..., None], spot, blur)
    return fx * fy
