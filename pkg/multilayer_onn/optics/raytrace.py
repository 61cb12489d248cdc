# multilayer_onn/optics/raytrace.py
# Purpose: Monte Carlo ray tracing of incoherent emitters through the weight mask

"""
Module: raytrace.py
Purpose: Unbiased Monte Carlo estimate of the power each photodiode collects from a set of
Lambertian micro-LED dies through a pixelated transmission mask.

Rays start uniformly on the die, leave with a cosine-weighted direction, pick up the mask
transmission where they cross the mask plane (the panel frame outside the raster is opaque)
and are binned into the detector active areas. Directions are drawn only inside the cone that
can still reach the detector array; every ray then carries the Lambertian power fraction of
that cone, which keeps the estimator unbiased.
"""

import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from multilayer_onn.errors import DomainError, InvalidArgumentError, ShapeError
from multilayer_onn.geometry.layout import DEFAULT_GUARD, StageGeometry, WeightMask, compile_mask
from multilayer_onn.utils.logger import get_logger, log_stage_summary
from multilayer_onn.utils.metrics import metrics_collector
from multilayer_onn.utils.parallel import batch_sizes, run_tasks
from multilayer_onn.utils.seeding import STREAM_RAYTRACE, derive_rng

logger = get_logger(__name__)

DEFAULT_BATCH_SIZE = 1 << 17


def sample_lambertian(rng: np.random.Generator, n: int, max_angle: float = np.pi / 2) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cosine-weighted directions, truncated to a cone about the emitter normal.

    Inverse-CDF sampling: sin^2(theta) = u * sin^2(max_angle), phi uniform.

    Args:
        rng (np.random.Generator): Random source.
        n (int): Number of directions.
        max_angle (float): Cone half-angle in radians, in (0, pi/2].

    Returns:
        Tuple[np.ndarray, np.ndarray]: (cos_theta, phi), each of length n.
    """
    if not 0 < max_angle <= np.pi / 2:
        raise InvalidArgumentError(f"Cone half-angle must be in (0, pi/2], got {max_angle}", module="optics")
    s2max = np.sin(max_angle) ** 2
    u = rng.random(n)
    cos_theta = np.sqrt(1.0 - u * s2max)
    phi = 2.0 * np.pi * rng.random(n)
    return cos_theta, phi


def reachable_cone(geom: StageGeometry, led_xy: np.ndarray) -> float:
    """
    Half-angle of the smallest emitter-normal cone holding every ray that can hit the detectors.

    Args:
        geom (StageGeometry): Stage geometry.
        led_xy (np.ndarray): Emitter centre.

    Returns:
        float: Cone half-angle in radians.
    """
    M = geom.magnification
    h = geom.emitters.die_size / 2.0
    x0, x1, y0, y1 = geom.detectors.bounds()
    reach = []
    for centre, lo_edge, hi_edge in ((led_xy[0], x0, x1), (led_xy[1], y0, y1)):
        lo = (centre - h) * (1.0 - 1.0 / M) + lo_edge / M
        hi = (centre + h) * (1.0 - 1.0 / M) + hi_edge / M
        reach.append(max(hi - (centre - h), (centre + h) - lo, 0.0))
    angle = float(np.arctan2(np.hypot(reach[0], reach[1]), geom.d1))
    return min(max(angle, 1e-12), np.pi / 2)


@dataclass
class RayHits:
    """Per-ray crossing data for one batch."""

    mask_row: np.ndarray
    mask_col: np.ndarray
    in_mask: np.ndarray
    detector: np.ndarray


def trace_batch(geom: StageGeometry, led_xy: np.ndarray, n: int, rng: np.random.Generator, max_angle: float) -> RayHits:
    """Trace n rays from one die to the mask and detector planes."""
    h = geom.emitters.die_size / 2.0
    start = led_xy[None, :] + rng.uniform(-h, h, size=(n, 2))
    cos_t, phi = sample_lambertian(rng, n, max_angle)
    tan_t = np.sqrt(1.0 - cos_t ** 2) / cos_t
    direction = np.stack([tan_t * np.cos(phi), tan_t * np.sin(phi)], axis=1)

    mask_xy = start + geom.d1 * direction
    uv = geom.mask.to_pixel(mask_xy)
    col = np.floor(uv[:, 0]).astype(np.int64)
    row = np.floor(uv[:, 1]).astype(np.int64)
    in_mask = (col >= 0) & (col < geom.mask.width) & (row >= 0) & (row < geom.mask.height)

    det = geom.detectors
    pd_xy = start + (geom.d1 + geom.d2) * direction
    dc = np.floor((pd_xy[:, 0] - det.origin[0]) / det.pitch + (det.cols - 1) / 2.0 + 0.5).astype(np.int64)
    dr = np.floor((det.rows - 1) / 2.0 - (pd_xy[:, 1] - det.origin[1]) / det.pitch + 0.5).astype(np.int64)
    on_grid = (dc >= 0) & (dc < det.cols) & (dr >= 0) & (dr < det.rows)
    idx = np.where(on_grid, dr * det.cols + dc, 0)
    centres = det.positions()[idx]
    half = det.active_size / 2.0
    inside = on_grid & (np.abs(pd_xy[:, 0] - centres[:, 0]) <= half) & (np.abs(pd_xy[:, 1] - centres[:, 1]) <= half)
    detector = np.where(inside, idx, -1)
    return RayHits(mask_row=np.where(in_mask, row, 0), mask_col=np.where(in_mask, col, 0), in_mask=in_mask, detector=detector)


def emitter_responses(
    geom: StageGeometry,
    raster: np.ndarray,
    rays_per_led: int,
    seed: int,
    emitters: Optional[List[int]] = None,
    threads: Optional[int] = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """
    Raw per-emitter detector power for unit emitter intensity.

    Each (emitter, batch) pair draws from its own derived stream and batches are summed in
    index order, so the result does not depend on the worker count.

    Returns:
        np.ndarray: (n, p) collected power fractions; rows of skipped emitters are zero.
    """
    n, p = geom.n_in, geom.n_out
    leds = geom.emitters.positions()
    chosen = list(range(n)) if emitters is None else list(emitters)
    sizes = batch_sizes(rays_per_led, batch_size)
    angles = {i: reachable_cone(geom, leds[i]) for i in chosen}
    tasks = [(i, b, size) for i in chosen for b, size in enumerate(sizes)]

    def run(task):
        i, b, size = task
        rng = derive_rng(seed, STREAM_RAYTRACE, i, b)
        hits = trace_batch(geom, leds[i], size, rng, angles[i])
        keep = hits.in_mask & (hits.detector >= 0)
        t = raster[hits.mask_row[keep], hits.mask_col[keep]]
        return np.bincount(hits.detector[keep], weights=t, minlength=p)

    partials = run_tasks(run, tasks, threads)
    out = np.zeros((n, p), dtype=float)
    for (i, _, _), part in zip(tasks, partials):
        out[i] += part
    for i in chosen:
        out[i] *= np.sin(angles[i]) ** 2 / rays_per_led
    metrics_collector.record_rays(len(chosen) * rays_per_led)
    return out


def _validate(geom: StageGeometry, mask: WeightMask, rays_per_led: int) -> None:
    if rays_per_led < 1:
        raise InvalidArgumentError(f"rays_per_led must be >= 1, got {rays_per_led}", module="optics")
    if mask.raster.shape != (geom.mask.height, geom.mask.width) or mask.shape != (geom.n_in, geom.n_out):
        raise ShapeError(
            f"Mask raster {mask.raster.shape} / windows {mask.shape} do not match geometry", module="optics"
        )


def raytrace_propagate(
    geom: StageGeometry,
    mask: WeightMask,
    intensities: np.ndarray,
    rays_per_led: int,
    seed: int,
    threads: Optional[int] = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """
    Monte Carlo estimate of per-detector collected power.

    Args:
        geom (StageGeometry): Stage geometry.
        mask (WeightMask): Compiled mask for geom.
        intensities (np.ndarray): Nonnegative emitter intensities, length n.
        rays_per_led (int): Rays traced per emitter.
        seed (int): Run seed.
        threads (Optional[int]): Worker threads.
        batch_size (int): Rays per batch; part of the reproducibility contract.

    Returns:
        np.ndarray: Collected power per detector, in units of emitted power (not normalized).
    """
    _validate(geom, mask, rays_per_led)
    I = np.asarray(intensities, dtype=float)
    if I.shape != (geom.n_in,):
        raise ShapeError(f"Expected {geom.n_in} intensities, got shape {I.shape}", module="optics")
    if np.any(I < 0) or not np.all(np.isfinite(I)):
        raise DomainError("Emitter intensities must be finite and nonnegative", module="optics")

    start = time.time()
    active = [int(i) for i in np.flatnonzero(I > 0)]
    if not active:
        return np.zeros(geom.n_out)
    responses = emitter_responses(geom, mask.raster, rays_per_led, seed, active, threads, batch_size)
    signal = I @ responses
    log_stage_summary("raytrace", time.time() - start, emitters=len(active), rays_per_led=rays_per_led)
    return signal


def collection_efficiency(
    geom: StageGeometry,
    rays_per_led: int,
    seed: int,
    guard: float = DEFAULT_GUARD,
    threads: Optional[int] = None,
) -> float:
    """
    Global collection constant from a full-open reference mask.

    Returns:
        float: Mean collected power per (emitter, detector) pair at unit weight.
    """
    reference = compile_mask(np.ones((geom.n_in, geom.n_out)), geom, guard)
    _validate(geom, reference, rays_per_led)
    responses = emitter_responses(geom, reference.raster, rays_per_led, seed, threads=threads)
    return float(responses.mean())


def raytrace_transfer_matrix(
    geom: StageGeometry,
    mask: WeightMask,
    rays_per_led: int,
    seed: int,
    collection: Optional[float] = None,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Effective (n, p) weight matrix seen through the ray-traced optics.

    Rows are unit-intensity emitter responses divided by the collection constant, so
    intensities @ matrix is on the same scale as ideal_mvm.
    """
    _validate(geom, mask, rays_per_led)
    if collection is None:
        collection = collection_efficiency(geom, rays_per_led, seed + 1, mask.guard, threads)
    if collection <= 0:
        raise DomainError("Collection efficiency is zero; no ray reaches the detectors", module="optics")
    return emitter_responses(geom, mask.raster, rays_per_led, seed, threads=threads) / collection
