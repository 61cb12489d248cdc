# multilayer_onn/geometry/layout.py
# Purpose: Place amplitude weights on the mask plane and rasterize weight matrices

"""
Module: layout.py
Purpose: Physical description of one optical matrix-vector stage (emitter grid, mask plane,
detector grid, distances) and compilation of a nonnegative weight matrix into a WeightMask.

Conventions:
    All lengths are micrometres. The physical origin is the optical axis (mask centre), +x to
    the right and +y up. Grid element index = row * cols + col, row 0 at the top.
    Mask pixel (0, 0) is the top-left pixel; the continuous pixel coordinate of physical
    point (x, y) is (u, v) = (W/2 + x/pitch, H/2 - y/pitch), pixel (r, c) covering
    [c, c+1) x [r, r+1).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from multilayer_onn.errors import (
    DomainError,
    InvalidGeometryError,
    LayoutInfeasibleError,
    OutOfApertureError,
    ShapeError,
)
from multilayer_onn.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_GUARD = 0.1
DEFAULT_GRAY_LEVELS = 256


def _grid_positions(rows: int, cols: int, pitch: float, origin: Tuple[float, float]) -> np.ndarray:
    r, c = np.divmod(np.arange(rows * cols), cols)
    x = origin[0] + (c - (cols - 1) / 2.0) * pitch
    y = origin[1] + ((rows - 1) / 2.0 - r) * pitch
    return np.stack([x, y], axis=1).astype(float)


@dataclass(frozen=True)
class EmitterGrid:
    """Rectangular micro-LED array; each emitter is a square die."""

    rows: int
    cols: int
    pitch: float
    die_size: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise InvalidGeometryError(f"Emitter grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not 0 < self.die_size <= self.pitch:
            raise InvalidGeometryError(
                f"Emitter die size must satisfy 0 < die_size <= pitch, got {self.die_size} / {self.pitch}"
            )

    @property
    def count(self) -> int:
        return self.rows * self.cols

    def positions(self) -> np.ndarray:
        """Return the (count, 2) array of emitter centres."""
        return _grid_positions(self.rows, self.cols, self.pitch, self.origin)


@dataclass(frozen=True)
class DetectorGrid:
    """Rectangular photodiode array; each detector has a square active area."""

    rows: int
    cols: int
    pitch: float
    active_size: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise InvalidGeometryError(f"Detector grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not 0 < self.active_size <= self.pitch:
            raise InvalidGeometryError(
                f"Detector active size must satisfy 0 < active_size <= pitch, got {self.active_size} / {self.pitch}"
            )

    @property
    def count(self) -> int:
        return self.rows * self.cols

    def positions(self) -> np.ndarray:
        """Return the (count, 2) array of detector centres."""
        return _grid_positions(self.rows, self.cols, self.pitch, self.origin)

    def bounds(self) -> Tuple[float, float, float, float]:
        """Outer edges of the active areas as (x0, x1, y0, y1)."""
        pos = self.positions()
        half = self.active_size / 2.0
        return (
            float(pos[:, 0].min() - half), float(pos[:, 0].max() + half),
            float(pos[:, 1].min() - half), float(pos[:, 1].max() + half),
        )


@dataclass(frozen=True)
class MaskPlane:
    """Pixelated transmission mask (LCD/SLM panel)."""

    pixel_pitch: float
    resolution: Tuple[int, int]
    gray_levels: int = DEFAULT_GRAY_LEVELS

    def __post_init__(self) -> None:
        if self.pixel_pitch <= 0:
            raise InvalidGeometryError(f"Mask pixel pitch must be positive, got {self.pixel_pitch}")
        if self.gray_levels < 2:
            raise InvalidGeometryError(f"Mask needs at least 2 gray levels, got {self.gray_levels}")
        if len(self.resolution) != 2 or min(self.resolution) < 1:
            raise InvalidGeometryError(f"Mask resolution must be (width, height) >= 1, got {self.resolution}")

    @property
    def width(self) -> int:
        return int(self.resolution[0])

    @property
    def height(self) -> int:
        return int(self.resolution[1])

    def to_pixel(self, xy: np.ndarray) -> np.ndarray:
        """Continuous pixel coordinates (u, v) = (column, row) of physical points."""
        xy = np.asarray(xy, dtype=float)
        u = self.width / 2.0 + xy[..., 0] / self.pixel_pitch
        v = self.height / 2.0 - xy[..., 1] / self.pixel_pitch
        return np.stack([u, v], axis=-1)

    def to_physical(self, uv: np.ndarray) -> np.ndarray:
        """Inverse of to_pixel."""
        uv = np.asarray(uv, dtype=float)
        x = (uv[..., 0] - self.width / 2.0) * self.pixel_pitch
        y = (self.height / 2.0 - uv[..., 1]) * self.pixel_pitch
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class StageGeometry:
    """One lensless optical MVM stage: LEDs -> d1 -> mask -> d2 -> photodiodes."""

    emitters: EmitterGrid
    detectors: DetectorGrid
    mask: MaskPlane
    d1: float
    d2: float

    def __post_init__(self) -> None:
        if self.d1 <= 0 or self.d2 <= 0:
            raise InvalidGeometryError(f"Distances must be positive, got d1={self.d1}, d2={self.d2}")

    @property
    def magnification(self) -> float:
        return magnification(self.d1, self.d2)

    @property
    def n_in(self) -> int:
        return self.emitters.count

    @property
    def n_out(self) -> int:
        return self.detectors.count


@dataclass(eq=False)
class WeightMask:
    """
    Rasterized amplitude mask.

    Attributes:
        raster (np.ndarray): (height, width) transmission values in [0, 1].
        rects (np.ndarray): (n, p, 4) integer windows as (row0, col0, height, width) in pixels.
        gray_levels (int): Quantization levels used for the raster.
        shifts (Optional[np.ndarray]): (n, p, 2) per-window (drow, dcol) offsets applied.
    """

    raster: np.ndarray
    rects: np.ndarray
    gray_levels: int
    shifts: Optional[np.ndarray] = None
    guard: float = DEFAULT_GUARD
    _labels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def shape(self) -> Tuple[int, int]:
        """(n emitters, p detectors) covered by the mask."""
        return int(self.rects.shape[0]), int(self.rects.shape[1])

    @property
    def windows(self) -> Dict[Tuple[int, int], Tuple[int, int, int, int]]:
        n, p = self.shape
        return {(i, j): tuple(int(v) for v in self.rects[i, j]) for i in range(n) for j in range(p)}

    def label_raster(self) -> np.ndarray:
        """Integer raster holding i * p + j inside window (i, j) and -1 elsewhere."""
        if self._labels is None:
            self._labels = _label_raster(self.rects, self.raster.shape)
        return self._labels

    def window_values(self) -> np.ndarray:
        """Quantized (n, p) transmission read back from the window origins."""
        r0 = self.rects[..., 0]
        c0 = self.rects[..., 1]
        return self.raster[r0, c0]


def magnification(d1: float, d2: float) -> float:
    """
    Size and shift scale factor of the lensless projection.

    Args:
        d1 (float): LED-to-mask distance.
        d2 (float): Mask-to-detector distance.

    Returns:
        float: M = (d1 + d2) / d1.
    """
    if d1 <= 0 or d2 <= 0:
        raise InvalidGeometryError(f"Distances must be positive, got d1={d1}, d2={d2}")
    return (d1 + d2) / d1


def mask_window_center(led_pos: Sequence[float], pd_pos: Sequence[float], M: float) -> np.ndarray:
    """
    Mask point whose projection from the LED lands on the detector.

    Inverts x_pd = x_led + M (x_amp - x_led).

    Args:
        led_pos: Emitter centre (x, y).
        pd_pos: Detector centre (x, y).
        M (float): Magnification, must exceed 1.

    Returns:
        np.ndarray: Window centre (x, y) on the mask plane.
    """
    if M <= 1:
        raise InvalidGeometryError(f"Magnification must exceed 1, got {M}")
    led = np.asarray(led_pos, dtype=float)
    pd = np.asarray(pd_pos, dtype=float)
    return led + (pd - led) / M


def project_to_detector(led_pos: Sequence[float], mask_pos: Sequence[float], M: float) -> np.ndarray:
    """Forward mapping x_pd = x_led + M (x_amp - x_led)."""
    led = np.asarray(led_pos, dtype=float)
    return led + M * (np.asarray(mask_pos, dtype=float) - led)


def window_extent(geom: StageGeometry, guard: float = DEFAULT_GUARD) -> float:
    """
    Side length of a weight window on the mask plane.

    The LED-die-to-PD-active-area ray bundle has footprint
    die + (active - die) * d1 / (d1 + d2) at the mask; the window is that footprint shrunk
    by the guard fraction.

    Args:
        geom (StageGeometry): Stage geometry.
        guard (float): Fractional shrink, in [0, 1).

    Returns:
        float: Window side length in micrometres.
    """
    if not 0 <= guard < 1:
        raise InvalidGeometryError(f"Guard fraction must lie in [0, 1), got {guard}")
    die = geom.emitters.die_size
    active = geom.detectors.active_size
    footprint = die + (active - die) / geom.magnification
    return (1.0 - guard) * footprint


def window_pixels(geom: StageGeometry, guard: float = DEFAULT_GUARD) -> int:
    """Window side in whole mask pixels (at least one)."""
    return max(1, int(np.floor(window_extent(geom, guard) / geom.mask.pixel_pitch + 0.5)))


def window_rects(
    geom: StageGeometry,
    guard: float = DEFAULT_GUARD,
    shifts: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Pixel rectangles for every (i, j) window.

    Args:
        geom (StageGeometry): Stage geometry.
        guard (float): Window guard fraction.
        shifts (Optional[np.ndarray]): (n, p, 2) integer (drow, dcol) offsets.

    Returns:
        np.ndarray: (n, p, 4) int array of (row0, col0, height, width).
    """
    n, p = geom.n_in, geom.n_out
    M = geom.magnification
    size = window_pixels(geom, guard)
    leds = geom.emitters.positions()
    pds = geom.detectors.positions()
    centers = leds[:, None, :] + (pds[None, :, :] - leds[:, None, :]) / M
    uv = geom.mask.to_pixel(centers)
    col0 = np.floor(uv[..., 0] - size / 2.0 + 0.5).astype(int)
    row0 = np.floor(uv[..., 1] - size / 2.0 + 0.5).astype(int)
    if shifts is not None:
        shifts = np.asarray(shifts, dtype=int)
        if shifts.shape != (n, p, 2):
            raise ShapeError(f"Shift map must have shape {(n, p, 2)}, got {shifts.shape}", module="geometry")
        row0 = row0 + shifts[..., 0]
        col0 = col0 + shifts[..., 1]
    rects = np.empty((n, p, 4), dtype=int)
    rects[..., 0] = row0
    rects[..., 1] = col0
    rects[..., 2] = size
    rects[..., 3] = size
    return rects


def _label_raster(rects: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    labels = np.full(shape, -1, dtype=np.int64)
    n, p = rects.shape[:2]
    for i in range(n):
        for j in range(p):
            r0, c0, h, w = rects[i, j]
            labels[r0:r0 + h, c0:c0 + w] = i * p + j
    return labels


def find_overlaps(rects: np.ndarray, shape: Tuple[int, int]) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """
    Window pairs sharing at least one mask pixel.

    Args:
        rects (np.ndarray): (n, p, 4) window rectangles, assumed inside the aperture.
        shape (Tuple[int, int]): Raster (height, width).

    Returns:
        List of ((i, j), (i2, j2)) pairs, each reported once.
    """
    labels = np.full(shape, -1, dtype=np.int64)
    n, p = rects.shape[:2]
    pairs = set()
    for i in range(n):
        for j in range(p):
            r0, c0, h, w = rects[i, j]
            block = labels[r0:r0 + h, c0:c0 + w]
            taken = np.unique(block[block >= 0])
            for other in taken:
                pairs.add((divmod(int(other), p), (i, j)))
            block[...] = i * p + j
    return sorted(pairs)


def check_aperture(rects: np.ndarray, mask: MaskPlane) -> None:
    """Raise OutOfApertureError if any window leaves the mask raster."""
    r0, c0, h, w = (rects[..., k] for k in range(4))
    bad = (r0 < 0) | (c0 < 0) | (r0 + h > mask.height) | (c0 + w > mask.width)
    if np.any(bad):
        idx = [tuple(int(v) for v in pair) for pair in np.argwhere(bad)[:8]]
        raise OutOfApertureError(
            f"{int(bad.sum())} windows exit the {mask.width}x{mask.height} mask aperture, e.g. {idx}",
            windows=idx,
        )


def quantize(values: np.ndarray, gray_levels: int) -> np.ndarray:
    """Round-to-nearest onto gray_levels uniform steps in [0, 1]."""
    steps = gray_levels - 1
    return np.floor(np.asarray(values, dtype=float) * steps + 0.5) / steps


def compile_mask(
    weights: np.ndarray,
    geom: StageGeometry,
    guard: float = DEFAULT_GUARD,
    shifts: Optional[np.ndarray] = None,
) -> WeightMask:
    """
    Rasterize a nonnegative weight matrix into an amplitude mask.

    Args:
        weights (np.ndarray): (n, p) weights in [0, 1].
        geom (StageGeometry): Stage geometry with n emitters and p detectors.
        guard (float): Window guard fraction.
        shifts (Optional[np.ndarray]): (n, p, 2) per-window pixel shifts.

    Returns:
        WeightMask: Quantized raster plus window rectangles.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (geom.n_in, geom.n_out):
        raise ShapeError(
            f"Weight matrix shape {w.shape} does not match geometry {(geom.n_in, geom.n_out)}",
            module="geometry",
        )
    if not np.all(np.isfinite(w)) or w.min() < 0 or w.max() > 1:
        raise DomainError("Mask weights must lie in [0, 1]", module="geometry")

    rects = window_rects(geom, guard, shifts)
    check_aperture(rects, geom.mask)
    shape = (geom.mask.height, geom.mask.width)
    overlaps = find_overlaps(rects, shape)
    if overlaps:
        raise LayoutInfeasibleError(overlaps)

    raster = np.zeros(shape, dtype=float)
    q = quantize(w, geom.mask.gray_levels)
    n, p = w.shape
    for i in range(n):
        for j in range(p):
            r0, c0, h, wd = rects[i, j]
            raster[r0:r0 + h, c0:c0 + wd] = q[i, j]

    logger.debug("Compiled %dx%d weight mask", n, p, extra={"window_px": int(rects[0, 0, 2]), "guard": guard})
    return WeightMask(
        raster=raster,
        rects=rects,
        gray_levels=geom.mask.gray_levels,
        shifts=None if shifts is None else np.asarray(shifts, dtype=int).copy(),
        guard=guard,
    )


def default_stage_geometries(d1: float = 5000.0, d2: float = 20000.0) -> List[StageGeometry]:
    """
    The three stages of the 64-50-50-64 network on a 1024x768 mask with 36 um pixels.

    LEDs: 4.05 mm pitch, 200 um dies. Photodiodes: 1.62 mm pitch, 600 um active area.
    With M = 5 every weight window is 7x7 pixels on a 9-pixel pitch.
    """
    mask = MaskPlane(pixel_pitch=36.0, resolution=(1024, 768), gray_levels=DEFAULT_GRAY_LEVELS)
    led_pitch, die = 4050.0, 200.0
    pd_pitch, active = 1620.0, 600.0
    return [
        StageGeometry(
            emitters=EmitterGrid(8, 8, led_pitch, die),
            detectors=DetectorGrid(10, 10, pd_pitch, active),
            mask=mask, d1=d1, d2=d2,
        ),
        StageGeometry(
            emitters=EmitterGrid(5, 10, led_pitch, die),
            detectors=DetectorGrid(10, 10, pd_pitch, active),
            mask=mask, d1=d1, d2=d2,
        ),
        StageGeometry(
            emitters=EmitterGrid(5, 10, led_pitch, die),
            detectors=DetectorGrid(8, 8, pd_pitch, active),
            mask=mask, d1=d1, d2=d2,
        ),
    ]
