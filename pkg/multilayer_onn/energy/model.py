# multilayer_onn/energy/model.py
# Purpose: Operation counting, power budget and performance-per-watt

"""
Module: model.py
Purpose: Structural operation counts of a multilayer optical accelerator and its power budget.

Only the first layer's emitters are written (DAC) and only the last layer's detectors are read
(ADC); intermediate activations stay in the analog domain. The default budget is an emulation
fitted to three reference operating points (see fit_energy_budget), not a component datasheet.
"""

from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import nnls

from multilayer_onn.errors import InvalidArgumentError, InvalidModelError

BUDGET_FIELDS = ("led_power_w", "rx_power_w", "static_power_w", "conversion_energy_j")


@dataclass(frozen=True)
class EnergyModel:
    """
    Power budget.

    Attributes:
        led_power_w (float): Average drive power per LED.
        rx_power_w (float): Analog power per receiver channel.
        conversion_energy_j (float): Energy per ADC/DAC sample.
        static_power_w (float): Overhead per board (layer).
        clock_hz (float): Sample clock.
        ops_per_mac (int): Operations counted per multiply-accumulate.
        emulated (bool): True when the budget is fitted rather than measured.
    """

    led_power_w: float = 0.0
    rx_power_w: float = 0.0
    conversion_energy_j: float = 5.68889e-12
    static_power_w: float = 0.17613
    clock_hz: float = 5.0e5
    ops_per_mac: int = 2
    emulated: bool = True

    def __post_init__(self) -> None:
        if min(self.led_power_w, self.rx_power_w, self.conversion_energy_j, self.static_power_w) < 0:
            raise InvalidModelError("Powers and energies must be nonnegative")
        if self.clock_hz <= 0:
            raise InvalidModelError(f"Clock must be positive, got {self.clock_hz}")
        if self.ops_per_mac < 1:
            raise InvalidModelError(f"ops_per_mac must be >= 1, got {self.ops_per_mac}")

    def at_clock(self, clock_hz: float) -> "EnergyModel":
        return replace(self, clock_hz=clock_hz)


@dataclass(frozen=True)
class LayerShape:
    led_grid: Tuple[int, int]
    pd_grid: Tuple[int, int]

    def __post_init__(self) -> None:
        if min(self.led_grid) < 1 or min(self.pd_grid) < 1:
            raise InvalidArgumentError("Grids must be at least 1x1", module="energy")

    @property
    def n_led(self) -> int:
        return int(self.led_grid[0] * self.led_grid[1])

    @property
    def n_pd(self) -> int:
        return int(self.pd_grid[0] * self.pd_grid[1])


@dataclass(frozen=True)
class AcceleratorConfig:
    """
    Attributes:
        layers (Tuple[LayerShape, ...]): Stages in order.
        board_size (float): Board side in micrometres.
        wavelength (float): Emission wavelength in micrometres.
    """

    layers: Tuple[LayerShape, ...]
    board_size: float = 24000.0
    wavelength: float = 0.525

    def __post_init__(self) -> None:
        if len(self.layers) < 1:
            raise InvalidArgumentError("An accelerator needs at least one layer", module="energy")
        if self.board_size <= 0 or self.wavelength < 0:
            raise InvalidArgumentError("Board size must be positive and wavelength nonnegative", module="energy")

    @classmethod
    def uniform(cls, led_grid: Tuple[int, int], pd_grid: Tuple[int, int], layers: int = 1, **kwargs) -> "AcceleratorConfig":
        return cls(layers=tuple(LayerShape(tuple(led_grid), tuple(pd_grid)) for _ in range(layers)), **kwargs)

    @classmethod
    def square(cls, grid_size: int, layers: int = 1, **kwargs) -> "AcceleratorConfig":
        """N x N detectors fed by (N/2) x N emitters, the shape of the 4x8 -> 8x8 demonstrator."""
        return cls.uniform((max(1, grid_size // 2), grid_size), (grid_size, grid_size), layers, **kwargs)

    @property
    def n_inputs(self) -> int:
        return self.layers[0].n_led

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].n_pd


def ops_per_cycle(cfg: AcceleratorConfig, model: EnergyModel) -> int:
    """Sum over layers of ops_per_mac * n_led * n_pd; one cycle processes one sample."""
    return int(sum(model.ops_per_mac * layer.n_led * layer.n_pd for layer in cfg.layers))


def ops_per_readin(cfg: AcceleratorConfig, model: EnergyModel = EnergyModel()) -> float:
    """Operations per converted sample (first-layer inputs plus last-layer outputs)."""
    return ops_per_cycle(cfg, model) / float(cfg.n_inputs + cfg.n_outputs)


def power_w(cfg: AcceleratorConfig, model: EnergyModel) -> float:
    """Total electrical power at the model's clock."""
    optics = sum(layer.n_led * model.led_power_w + layer.n_pd * model.rx_power_w for layer in cfg.layers)
    static = len(cfg.layers) * model.static_power_w
    conversion = model.conversion_energy_j * model.clock_hz * (cfg.n_inputs + cfg.n_outputs)
    return optics + static + conversion


def perf_per_watt(cfg: AcceleratorConfig, model: EnergyModel) -> float:
    """
    Throughput over power.

    Args:
        cfg (AcceleratorConfig): Accelerator shape.
        model (EnergyModel): Power budget and clock.

    Returns:
        float: Operations per second per watt.
    """
    power = power_w(cfg, model)
    if power <= 0:
        raise InvalidModelError("Total power is zero; performance per watt is undefined")
    return ops_per_cycle(cfg, model) * model.clock_hz / power


@dataclass(frozen=True)
class EnergyAnchor:
    """A reference operating point: configuration, clock and OPS/W."""

    cfg: AcceleratorConfig
    clock_hz: float
    ops_per_watt: float


def default_anchors() -> List[EnergyAnchor]:
    """Demonstrator (4x8 -> 8x8 at 500 kHz), 32x32 at 500 kHz, and the high-clock asymptote."""
    return [
        EnergyAnchor(AcceleratorConfig.uniform((4, 8), (8, 8)), 5.0e5, 11.61e9),
        EnergyAnchor(AcceleratorConfig.square(32), 5.0e5, 2.92e12),
        EnergyAnchor(AcceleratorConfig.square(32), 1.0e13, 120.0e12),
    ]


def fit_energy_budget(
    anchors: Sequence[EnergyAnchor] = (),
    free: Sequence[str] = ("static_power_w", "conversion_energy_j"),
    ops_per_mac: int = 2,
) -> EnergyModel:
    """
    Fit budget components to operating points by nonnegative least squares on relative residuals.

    Each anchor fixes the total power ops * clock / (OPS/W), which is linear in every budget
    component. Rows are scaled by that power so all anchors weigh equally.

    Args:
        anchors (Sequence[EnergyAnchor]): Operating points; the three defaults when empty.
        free (Sequence[str]): Budget fields to fit; the others stay zero.
        ops_per_mac (int): Operation accounting.

    Returns:
        EnergyModel: Fitted budget at the first anchor's clock.
    """
    anchors = list(anchors) or default_anchors()
    unknown = [name for name in free if name not in BUDGET_FIELDS]
    if unknown or not free:
        raise InvalidArgumentError(f"Free fields must be a nonempty subset of {BUDGET_FIELDS}, got {list(free)}", module="energy")
    rows, target = [], []
    for a in anchors:
        if a.ops_per_watt <= 0 or a.clock_hz <= 0:
            raise InvalidArgumentError("Anchors need positive clock and OPS/W", module="energy")
        cfg = a.cfg
        columns = {
            "led_power_w": sum(l.n_led for l in cfg.layers),
            "rx_power_w": sum(l.n_pd for l in cfg.layers),
            "static_power_w": len(cfg.layers),
            "conversion_energy_j": a.clock_hz * (cfg.n_inputs + cfg.n_outputs),
        }
        ops = sum(ops_per_mac * l.n_led * l.n_pd for l in cfg.layers)
        power = ops * a.clock_hz / a.ops_per_watt
        rows.append([columns[name] / power for name in free])
        target.append(1.0)
    solution, _ = nnls(np.array(rows, dtype=float), np.array(target))
    values = dict.fromkeys(BUDGET_FIELDS, 0.0)
    values.update({name: float(v) for name, v in zip(free, solution)})
    return EnergyModel(clock_hz=anchors[0].clock_hz, ops_per_mac=ops_per_mac, emulated=True, **values)
