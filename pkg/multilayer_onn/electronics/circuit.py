# multilayer_onn/electronics/circuit.py
# Purpose: Behavioural model of the analog neuron (differencing, LED drive, settling)

"""
Module: circuit.py
Purpose: Paired photodetection with differencing, offset and gain, an LED drive that only
emits under forward bias, and a first-order settling model of the stage bandwidth.
"""

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from multilayer_onn.errors import DomainError, InvalidArgumentError

ArrayLike = Union[float, np.ndarray]

DEFAULT_BANDWIDTH_HZ = 1.0e6


@dataclass(frozen=True)
class LedCurve:
    """
    Drive-to-intensity response of the output LED.

    kind 'identity' gives max(0, x); kind 'saturating' gives s * (1 - exp(-x / s)) for x > 0.
    """

    kind: str = "identity"
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "saturating"):
            raise InvalidArgumentError(f"Unknown LED curve '{self.kind}'", module="electronics")
        if self.scale <= 0:
            raise InvalidArgumentError(f"Saturation scale must be positive, got {self.scale}", module="electronics")


@dataclass(frozen=True)
class NeuronCircuit:
    """Differencing neuron: led_curve(gain * (pd_pos - pd_neg) + offset)."""

    gain: float = 1.0
    offset: float = 0.0
    led_curve: LedCurve = field(default_factory=LedCurve)
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ

    def __post_init__(self) -> None:
        if self.gain <= 0:
            raise InvalidArgumentError(f"Neuron gain must be positive, got {self.gain}", module="electronics")
        if not np.isfinite(self.offset):
            raise InvalidArgumentError("Neuron offset must be finite", module="electronics")
        if self.bandwidth_hz <= 0:
            raise InvalidArgumentError(f"Bandwidth must be positive, got {self.bandwidth_hz}", module="electronics")


@dataclass(frozen=True)
class SettleResult:
    settled: bool
    residual: float


def apply_led_nonlinearity(drive: ArrayLike, curve: LedCurve) -> ArrayLike:
    """
    LED intensity for a given drive.

    Args:
        drive: Scalar or array drive level.
        curve (LedCurve): Response descriptor.

    Returns:
        Intensity, zero wherever drive <= 0.
    """
    x = np.asarray(drive, dtype=float)
    if curve.kind == "identity":
        out = np.maximum(x, 0.0)
    else:
        s = curve.scale
        out = np.where(x > 0, s * -np.expm1(-np.maximum(x, 0.0) / s), 0.0)
    return out if out.ndim else float(out)


def led_derivative(drive: np.ndarray, curve: LedCurve) -> np.ndarray:
    """Derivative of apply_led_nonlinearity; zero at and below the threshold."""
    x = np.asarray(drive, dtype=float)
    if curve.kind == "identity":
        return (x > 0).astype(float)
    return np.where(x > 0, np.exp(-np.maximum(x, 0.0) / curve.scale), 0.0)


def differential_relu(pd_pos: ArrayLike, pd_neg: ArrayLike, circuit: NeuronCircuit) -> ArrayLike:
    """
    Neuron output for one photodiode pair.

    Args:
        pd_pos: Power on the positive photodiode.
        pd_neg: Power on the negative photodiode.
        circuit (NeuronCircuit): Gain, offset and LED curve.

    Returns:
        led_curve(gain * (pd_pos - pd_neg) + offset).
    """
    pos = np.asarray(pd_pos, dtype=float)
    neg = np.asarray(pd_neg, dtype=float)
    if np.any(pos < 0) or np.any(neg < 0):
        raise DomainError("Photodiode powers must be nonnegative", module="electronics")
    return apply_led_nonlinearity(circuit.gain * (pos - neg) + circuit.offset, circuit.led_curve)


def settle_check(clock_hz: float, bandwidth_hz: float, tolerance: float) -> SettleResult:
    """
    First-order low-pass settling within half a clock period.

    Args:
        clock_hz (float): Operating clock.
        bandwidth_hz (float): -3 dB bandwidth of one stage.
        tolerance (float): Largest acceptable residual, in (0, 1).

    Returns:
        SettleResult: residual = exp(-2 pi B * 0.5 / clock).
    """
    if clock_hz <= 0 or bandwidth_hz <= 0:
        raise InvalidArgumentError(
            f"Frequencies must be positive, got clock={clock_hz}, bandwidth={bandwidth_hz}", module="electronics"
        )
    if not 0 < tolerance < 1:
        raise InvalidArgumentError(f"Tolerance must be in (0, 1), got {tolerance}", module="electronics")
    residual = float(np.exp(-2.0 * np.pi * bandwidth_hz * 0.5 / clock_hz))
    return SettleResult(settled=residual <= tolerance, residual=residual)
