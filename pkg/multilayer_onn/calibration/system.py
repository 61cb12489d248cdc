# multilayer_onn/calibration/system.py
# Purpose: Simulated single-stage hardware with injectable variability

"""
Module: system.py
Purpose: A stand-in for one physical optical stage and its differencing neurons.

Effective transmission of window (i, j) set to w is T_ij = g_ij * (e_ij + (1 - e_ij) * w), where
g_ij folds together weight-response, LED brightness and photodiode variability and e_ij is the
residual extinction. A global mask misalignment moves every window's spot on the detector plane.
Probing is either algebraic (geometric spot coupling) or ray traced.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from multilayer_onn.electronics.circuit import LedCurve, apply_led_nonlinearity
from multilayer_onn.errors import InvalidArgumentError, ShapeError
from multilayer_onn.geometry.crosstalk import window_coupling
from multilayer_onn.geometry.layout import DEFAULT_GUARD, StageGeometry, compile_mask
from multilayer_onn.optics.raytrace import reachable_cone, trace_batch
from multilayer_onn.utils.metrics import metrics_collector
from multilayer_onn.utils.parallel import batch_sizes, run_tasks
from multilayer_onn.utils.seeding import STREAM_CALIBRATION, STREAM_RAYTRACE, derive_rng

PROBE_MODES = ("algebraic", "raytraced")


@dataclass(eq=False)
class SimulatedSystem:
    """
    One stage of simulated hardware.

    Attributes:
        geometry (StageGeometry): Stage layout.
        weight_gain (Optional[np.ndarray]): (n, p) injected per-weight gains (default ones).
        extinction (Optional[np.ndarray]): (n, p) injected extinction ratios in [0, 1) (default zeros).
        neuron_gain (Optional[np.ndarray]): (p/2,) injected neuron gains (default ones).
        neuron_offset (Optional[np.ndarray]): (p/2,) injected neuron offsets (default zeros).
        misalignment (Tuple[float, float]): Global mask displacement (drow, dcol) in pixels.
        probe_noise_sigma (float): Additive Gaussian noise on every reading.
        mode (str): 'algebraic' or 'raytraced' probing.
        rays_per_led (int): Rays per emitter for raytraced probing.
        guard (float): Window guard fraction.
        led_curve (LedCurve): Neuron LED response.
    """

    geometry: StageGeometry
    weight_gain: Optional[np.ndarray] = None
    extinction: Optional[np.ndarray] = None
    neuron_gain: Optional[np.ndarray] = None
    neuron_offset: Optional[np.ndarray] = None
    misalignment: Tuple[float, float] = (0.0, 0.0)
    probe_noise_sigma: float = 0.0
    mode: str = "algebraic"
    rays_per_led: int = 100_000
    guard: float = DEFAULT_GUARD
    led_curve: LedCurve = field(default_factory=LedCurve)
    _reference: Optional[float] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        n, p = self.geometry.n_in, self.geometry.n_out
        if p % 2:
            raise ShapeError(f"Differencing neurons need an even detector count, got {p}", module="calibration")
        m = p // 2
        self.weight_gain = np.ones((n, p)) if self.weight_gain is None else np.asarray(self.weight_gain, dtype=float)
        self.extinction = np.zeros((n, p)) if self.extinction is None else np.asarray(self.extinction, dtype=float)
        self.neuron_gain = np.ones(m) if self.neuron_gain is None else np.asarray(self.neuron_gain, dtype=float)
        self.neuron_offset = np.zeros(m) if self.neuron_offset is None else np.asarray(self.neuron_offset, dtype=float)
        if self.weight_gain.shape != (n, p) or self.extinction.shape != (n, p):
            raise ShapeError(f"Per-weight maps must have shape {(n, p)}", module="calibration")
        if self.neuron_gain.shape != (m,) or self.neuron_offset.shape != (m,):
            raise ShapeError(f"Neuron maps must have length {m}", module="calibration")
        if np.any(self.weight_gain < 0) or np.any(self.extinction < 0) or np.any(self.extinction >= 1):
            raise InvalidArgumentError("Weight gains must be >= 0 and extinction in [0, 1)", module="calibration")
        if self.mode not in PROBE_MODES:
            raise InvalidArgumentError(f"Unknown probe mode '{self.mode}'", module="calibration")
        if self.rays_per_led < 1 or self.probe_noise_sigma < 0:
            raise InvalidArgumentError("rays_per_led must be >= 1 and probe noise >= 0", module="calibration")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.geometry.n_in, self.geometry.n_out

    @property
    def n_neurons(self) -> int:
        return self.geometry.n_out // 2

    def transmission(self, weights: np.ndarray) -> np.ndarray:
        """T = g * (e + (1 - e) * w) for an (n, p) weight matrix."""
        w = np.asarray(weights, dtype=float)
        if w.shape != self.shape:
            raise ShapeError(f"Weights {w.shape} do not match stage {self.shape}", module="calibration")
        return self.weight_gain * (self.extinction + (1.0 - self.extinction) * w)

    def window_offsets(self, shifts: Optional[np.ndarray] = None) -> np.ndarray:
        """Net (n, p, 2) displacement of every window: applied shifts plus the mask misalignment."""
        n, p = self.shape
        offsets = np.broadcast_to(np.asarray(self.misalignment, dtype=float), (n, p, 2)).copy()
        if shifts is not None:
            offsets += np.asarray(shifts, dtype=float)
        return offsets

    def coupling(self, shifts: Optional[np.ndarray] = None) -> np.ndarray:
        """
        (n, p, p) spot coupling normalized so an aligned window puts exactly 1 on its own detector.
        """
        raw = window_coupling(self.geometry, self.window_offsets(shifts), self.guard)
        return raw / self.reference_coupling()

    def reference_coupling(self) -> float:
        """Own-detector coupling of an aligned window."""
        if self._reference is None:
            aligned = window_coupling(self.geometry, np.zeros((1, self.geometry.n_out, 2)), self.guard)
            self._reference = float(np.mean(np.einsum("ijj->ij", aligned)))
        return self._reference

    def window_row(self, i: int, j: int, shift: np.ndarray) -> np.ndarray:
        """(p,) normalized coupling of window (i, j) alone under a candidate shift."""
        offsets = self.window_offsets()[:1].copy()
        offsets[0, j] += np.asarray(shift, dtype=float)
        return window_coupling(self.geometry, offsets, self.guard)[0, j] / self.reference_coupling()

    def stage_signals(self, intensities: np.ndarray, weights: np.ndarray, shifts: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Detector signals of the stage under the algebraic coupling model.

        Args:
            intensities (np.ndarray): (n,) or (batch, n) emitter intensities.
            weights (np.ndarray): (n, p) programmed weights.
            shifts (Optional[np.ndarray]): (n, p, 2) window shifts in pixels.

        Returns:
            np.ndarray: (p,) or (batch, p) signals.
        """
        T = self.transmission(weights)
        C = self.coupling(shifts)
        return np.einsum("...i,ij,ijk->...k", np.asarray(intensities, dtype=float), T, C)

    def neuron_output(self, pd_pos: np.ndarray, pd_neg: np.ndarray) -> np.ndarray:
        """Responses of all neurons to per-neuron positive/negative detector powers."""
        z = self.neuron_gain * (np.asarray(pd_pos, dtype=float) - np.asarray(pd_neg, dtype=float)) + self.neuron_offset
        return apply_led_nonlinearity(z, self.led_curve)

    def open_window_response(self, seed: int, shifts: Optional[np.ndarray] = None, threads: Optional[int] = None) -> np.ndarray:
        """
        Reading of detector j with emitter i on and only window (i, j) fully open, for all (i, j).

        In raytraced mode every emitter is traced once and each ray is attributed to the window it
        crosses, which equals n * p separate single-window probes sharing random numbers.

        Returns:
            np.ndarray: (n, p) readings before per-weight gain and extinction.
        """
        n, p = self.shape
        if self.mode == "algebraic":
            return np.einsum("ijj->ij", self.coupling(shifts)).copy()
        geom = self.geometry
        whole = np.rint(self.window_offsets(shifts)).astype(int)
        mask = compile_mask(np.ones((n, p)), geom, self.guard, whole)
        labels = mask.label_raster()
        leds = geom.emitters.positions()
        sizes = batch_sizes(self.rays_per_led, 1 << 17)
        tasks = [(i, b, size) for i in range(n) for b, size in enumerate(sizes)]
        angles = [reachable_cone(geom, leds[i]) for i in range(n)]

        def run(task):
            i, b, size = task
            rng = derive_rng(seed, STREAM_RAYTRACE, i, b)
            hits = trace_batch(geom, leds[i], size, rng, angles[i])
            lab = np.where(hits.in_mask, labels[hits.mask_row, hits.mask_col], -1)
            own = (lab >= 0) & (lab // p == i) & (hits.detector == lab % p)
            return np.bincount(lab[own] % p, minlength=p).astype(float)

        out = np.zeros((n, p))
        for (i, _, _), counts in zip(tasks, run_tasks(run, tasks, threads)):
            out[i] += counts
        for i in range(n):
            out[i] *= np.sin(angles[i]) ** 2 / self.rays_per_led
        metrics_collector.record_rays(n * self.rays_per_led)
        return out

    def read(self, values: np.ndarray, seed: int, *key: int) -> np.ndarray:
        """Add probe noise to a set of readings."""
        values = np.asarray(values, dtype=float)
        if self.probe_noise_sigma <= 0:
            return values
        rng = derive_rng(seed, STREAM_CALIBRATION, *key)
        return values + rng.normal(0.0, self.probe_noise_sigma, size=values.shape)
