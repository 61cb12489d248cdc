# multilayer_onn/electronics/noise.py
# Purpose: Detector noise floor and variability emulation

"""
Module: noise.py
Purpose: Minimum usable optical power versus bandwidth, additive photodiode noise,
per-weight multiplicative perturbations and per-neuron offset spread.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from multilayer_onn.errors import InvalidArgumentError, ShapeError
from multilayer_onn.utils.seeding import STREAM_NOISE, STREAM_OFFSETS, STREAM_WEIGHT_PERTURB, derive_rng

PLANCK = 6.62607015e-34
LIGHT_SPEED = 2.99792458e8


@dataclass(frozen=True)
class NoiseSpec:
    """
    Noise and variability parameters.

    Attributes:
        nep (float): Noise-equivalent power in W/sqrt(Hz).
        relative_weight_sigma (float): Std of the multiplicative per-weight factor.
        pd_additive_sigma (float): Std of additive detector noise (signal units).
        seed (int): Seed of the per-instance weight perturbation.
        mode (str): 'nep' (P ~ sqrt(B)) or 'shot' (P ~ B).
        wavelength_um (float): Used by the shot-noise mode.
        quantum_efficiency (float): Used by the shot-noise mode.
    """

    nep: float = 1.0e-12
    relative_weight_sigma: float = 0.0
    pd_additive_sigma: float = 0.0
    seed: int = 0
    mode: str = "nep"
    wavelength_um: float = 0.525
    quantum_efficiency: float = 0.8

    def __post_init__(self) -> None:
        if min(self.nep, self.relative_weight_sigma, self.pd_additive_sigma) < 0:
            raise InvalidArgumentError("Noise parameters must be nonnegative", module="electronics")
        if self.mode not in ("nep", "shot"):
            raise InvalidArgumentError(f"Unknown noise mode '{self.mode}'", module="electronics")
        if not 0 < self.quantum_efficiency <= 1:
            raise InvalidArgumentError("Quantum efficiency must be in (0, 1]", module="electronics")


def min_optical_power(bandwidth_hz: float, noise: NoiseSpec, snr_target: float) -> float:
    """
    Smallest optical power reaching a target SNR at a given bandwidth.

    Args:
        bandwidth_hz (float): Circuit bandwidth.
        noise (NoiseSpec): Detector parameters.
        snr_target (float): Required signal-to-noise ratio.

    Returns:
        float: Power in watts; snr * nep * sqrt(B) in 'nep' mode, snr^2 * 2 h nu B / eta in 'shot' mode.
    """
    if bandwidth_hz <= 0 or snr_target <= 0:
        raise InvalidArgumentError(
            f"Bandwidth and SNR must be positive, got {bandwidth_hz}, {snr_target}", module="electronics"
        )
    if noise.mode == "shot":
        photon_energy = PLANCK * LIGHT_SPEED / (noise.wavelength_um * 1e-6)
        return snr_target ** 2 * 2.0 * photon_energy * bandwidth_hz / noise.quantum_efficiency
    return snr_target * noise.nep * np.sqrt(bandwidth_hz)


def draw_weight_perturbation(shape: Tuple[int, ...], noise: NoiseSpec, instance: int = 0) -> np.ndarray:
    """
    Multiplicative factors (1 + eps) for one model instance.

    The draw depends only on noise.seed and the instance key, so repeated forwards of the same
    instance see the same perturbed weights.
    """
    rng = derive_rng(noise.seed, STREAM_WEIGHT_PERTURB, instance)
    eps = rng.normal(0.0, noise.relative_weight_sigma, size=shape) if noise.relative_weight_sigma > 0 else np.zeros(shape)
    return 1.0 + eps


def emulate_offsets(m: int, sigma: float, seed: int, instance: int = 0) -> np.ndarray:
    """Per-neuron offsets drawn from N(0, sigma^2)."""
    if sigma < 0:
        raise InvalidArgumentError("Offset sigma must be nonnegative", module="electronics")
    return derive_rng(seed, STREAM_OFFSETS, instance).normal(0.0, sigma, size=m) if sigma > 0 else np.zeros(m)


def apply_noise(
    signal: np.ndarray,
    noise: NoiseSpec,
    seed: int,
    intensities: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Perturb detector signals.

    When the stage intensities and weights are given, the signal also receives the effect of
    the instance's multiplicative weight perturbation, I @ (W * eps). Additive zero-mean
    Gaussian noise per detector follows; results are clamped at zero.

    Args:
        signal (np.ndarray): (p,) or (batch, p) signals.
        noise (NoiseSpec): Noise parameters.
        seed (int): Seed of the additive draw.
        intensities (Optional[np.ndarray]): Stage inputs matching signal's leading shape.
        weights (Optional[np.ndarray]): (n, p) stage weights.

    Returns:
        np.ndarray: Perturbed, nonnegative signals.
    """
    out = np.array(signal, dtype=float, copy=True)
    if intensities is not None and weights is not None and noise.relative_weight_sigma > 0:
        W = np.asarray(weights, dtype=float)
        I = np.asarray(intensities, dtype=float)
        if W.shape[-1] != out.shape[-1] or I.shape[-1] != W.shape[0]:
            raise ShapeError("Intensities, weights and signal do not chain", module="electronics")
        out = out + I @ (W * (draw_weight_perturbation(W.shape, noise) - 1.0))
    if noise.pd_additive_sigma > 0:
        rng = derive_rng(seed, STREAM_NOISE)
        out = out + rng.normal(0.0, noise.pd_additive_sigma, size=out.shape)
    return np.maximum(out, 0.0)
