# multilayer_onn/config/schema.py
# Purpose: Validated run configuration loaded from YAML

"""
Module: schema.py
Purpose: Strict pydantic models for the YAML run configuration, plus parsing, override and dump
helpers. Unknown keys are rejected everywhere so a typo never silently falls back to a default.
"""

import os
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from multilayer_onn.config.settings import Settings
from multilayer_onn.electronics.circuit import LedCurve
from multilayer_onn.electronics.noise import NoiseSpec
from multilayer_onn.energy.model import EnergyModel
from multilayer_onn.energy.scaling import DEFAULT_GRID_SIZES, DiffractionSweep
from multilayer_onn.errors import ConfigIOError, ConfigValidationError
from multilayer_onn.network.training import TrainConfig

Command = Literal["prepare-data", "train", "compile-mask", "calibrate", "infer", "energy-scan", "reproduce"]
Target = Literal["mnist", "spiral"]
COMMANDS = Command.__args__
TARGETS = Target.__args__
# Commands that read the MNIST IDX files from paths.data_dir.
DATA_COMMANDS = ("prepare-data", "train", "infer", "reproduce")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    """
    Inputs read by a run. checkpoint and calibration_dir must exist when given; data_dir must
    exist once an MNIST command that reads data is chosen.
    """

    data_dir: str = Field(default_factory=lambda: Settings().data_dir)
    checkpoint: Optional[str] = None
    calibration_dir: Optional[str] = None

    @field_validator("checkpoint", "calibration_dir")
    @classmethod
    def validate_exists(cls, v):
        if v is not None and not os.path.exists(v):
            raise ValueError(f"path does not exist: {v}")
        return v


class GeometryConfig(_Section):
    d1: float = Field(default=5000.0, gt=0)
    d2: float = Field(default=20000.0, gt=0)
    guard: float = Field(default=0.1, ge=0, lt=1)


class NoiseConfig(_Section):
    nep: float = Field(default=1.0e-12, ge=0)
    relative_weight_sigma: float = Field(default=0.05, ge=0)
    pd_additive_sigma: float = Field(default=0.01, ge=0)
    offset_sigma: float = Field(default=0.0, ge=0)
    crosstalk: bool = True
    mode: Literal["nep", "shot"] = "nep"
    wavelength_um: float = Field(default=0.525, gt=0)
    quantum_efficiency: float = Field(default=0.8, gt=0, le=1)

    def to_noise_spec(self, seed: int) -> NoiseSpec:
        return NoiseSpec(
            nep=self.nep,
            relative_weight_sigma=self.relative_weight_sigma,
            pd_additive_sigma=self.pd_additive_sigma,
            seed=seed,
            mode=self.mode,
            wavelength_um=self.wavelength_um,
            quantum_efficiency=self.quantum_efficiency,
        )


class CircuitConfig(_Section):
    led_curve: Literal["identity", "saturating"] = "identity"
    led_scale: float = Field(default=1.0, gt=0)
    bandwidth_hz: float = Field(default=1.0e6, gt=0)
    settle_tolerance: float = Field(default=0.01, gt=0, lt=1)

    def to_led_curve(self) -> LedCurve:
        return LedCurve(kind=self.led_curve, scale=self.led_scale)


class TrainSection(_Section):
    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=128, ge=1)
    epochs: int = Field(default=30, ge=0)
    augment: bool = True
    augment_probability: float = Field(default=0.5, ge=0, le=1)
    crosstalk_shift: float = Field(default=0.2, ge=0)
    offset_sigma: float = Field(default=0.02, ge=0)
    activation_sigma: float = Field(default=0.05, ge=0)
    learn_offsets: bool = False
    offset_limit: float = Field(default=1.0, ge=0)

    def to_train_config(self, seed: int, guard: float) -> TrainConfig:
        return TrainConfig(seed=seed, guard=guard, **self.model_dump())


class NetworkConfig(_Section):
    hidden: List[int] = Field(default_factory=lambda: [50, 50])
    n_out: int = Field(default=64, ge=2)
    w_min: float = Field(default=0.01, ge=0)
    w_max: float = Field(default=1.0, gt=0)
    fidelities: List[Literal["algebraic", "raytraced", "noisy"]] = Field(default_factory=lambda: ["algebraic", "noisy"])
    rays_per_led: int = Field(default=20000, ge=1)

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.w_min >= self.w_max:
            raise ValueError("w_min must be below w_max")
        if self.n_out % 2:
            raise ValueError("n_out must be even")
        return self


class CalibrationConfig(_Section):
    """Injected variability of the simulated hardware and the calibration procedure settings."""

    gain_sigma: float = Field(default=0.2, ge=0)
    extinction: float = Field(default=0.02, ge=0, lt=1)
    neuron_gain_sigma: float = Field(default=0.05, ge=0)
    neuron_offset_sigma: float = Field(default=0.02, ge=0)
    misalignment: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2)
    probe_noise_sigma: float = Field(default=0.0, ge=0)
    mode: Literal["algebraic", "raytraced"] = "algebraic"
    rays_per_led: int = Field(default=100000, ge=1)
    gain_tolerance: float = Field(default=0.3, ge=0)
    offset_tolerance: float = Field(default=0.1, ge=0)
    anchor: Literal["median", "mean"] = "median"
    align: bool = True
    max_shift: int = Field(default=3, ge=0)
    crosstalk_weight: float = Field(default=1.0, ge=0)


class EnergyConfig(_Section):
    led_power_w: float = Field(default=0.0, ge=0)
    rx_power_w: float = Field(default=0.0, ge=0)
    static_power_w: float = Field(default=0.17613, ge=0)
    conversion_energy_j: float = Field(default=5.68889e-12, ge=0)
    clock_hz: float = Field(default=5.0e5, gt=0)
    grid_sizes: List[int] = Field(default_factory=lambda: [8, 16, 32, 64, 128])
    layer_counts: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    clocks: List[float] = Field(default_factory=lambda: [1e5, 5e5, 1e6, 1e7, 1e8, 1e9, 1e10])
    bandwidths: List[float] = Field(default_factory=lambda: [1e4, 1e5, 1e6, 1e7, 1e8])
    snr_target: float = Field(default=10.0, gt=0)

    def to_energy_model(self) -> EnergyModel:
        return EnergyModel(
            led_power_w=self.led_power_w,
            rx_power_w=self.rx_power_w,
            static_power_w=self.static_power_w,
            conversion_energy_j=self.conversion_energy_j,
            clock_hz=self.clock_hz,
        )


class DiffractionConfig(_Section):
    enabled: bool = False
    board_size: float = Field(default=24000.0, gt=0)
    fill: float = Field(default=0.5, gt=0, le=1)
    distance: float = Field(default=10000.0, gt=0)
    die_fraction: float = Field(default=1e-3, gt=0)
    guard: float = Field(default=0.1, ge=0, lt=1)
    wavelength: float = Field(default=0.525, gt=0)
    grid_sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_GRID_SIZES))
    threshold: float = Field(default=0.1, gt=0, lt=1)
    realizations: int = Field(default=4, ge=1)
    samples_per_window: int = Field(default=16, ge=2)
    max_grid: int = Field(default_factory=lambda: Settings().max_grid)

    def to_sweep(self) -> DiffractionSweep:
        values = self.model_dump(exclude={"enabled"})
        values["grid_sizes"] = tuple(values["grid_sizes"])
        return DiffractionSweep(**values)


class SpiralConfig(_Section):
    """Spiral problem and the training overrides it uses instead of the MNIST defaults."""

    per_class: int = Field(default=300, ge=1)
    noise_sigma: float = Field(default=0.2, ge=0)
    turns: float = Field(default=1.75, gt=0)
    epochs: int = Field(default=300, ge=0)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=3e-3, gt=0)
    learn_offsets: bool = True


class RunConfig(_Section):
    command: Optional[Command] = None
    target: Target = "mnist"
    seed: int = Field(default_factory=lambda: Settings().seed, ge=0)
    output_dir: str = Field(default_factory=lambda: Settings().output_dir)
    threads: int = Field(default_factory=lambda: Settings().threads, ge=1)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    circuit: CircuitConfig = Field(default_factory=CircuitConfig)
    train: TrainSection = Field(default_factory=TrainSection)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    energy: EnergyConfig = Field(default_factory=EnergyConfig)
    diffraction: DiffractionConfig = Field(default_factory=DiffractionConfig)
    spiral: SpiralConfig = Field(default_factory=SpiralConfig)


def _validate(data: Dict[str, Any], source: str) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigValidationError(f"{source}: invalid config key '{key}': {first['msg']}", key=key)
    # data_dir is only referenced once an MNIST command is chosen
    if cfg.target == "mnist" and cfg.command in DATA_COMMANDS and not os.path.isdir(cfg.paths.data_dir):
        raise ConfigValidationError(
            f"{source}: invalid config key 'paths.data_dir': MNIST data directory does not exist: {cfg.paths.data_dir}",
            key="paths.data_dir",
        )
    return cfg


def parse_config(path: str) -> RunConfig:
    """
    Load and validate a YAML run config.

    Args:
        path (str): YAML file.

    Returns:
        RunConfig: Validated config with every default filled in.
    """
    if not os.path.isfile(path):
        raise ConfigIOError(f"Config file not found: {path}", path=path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigIOError(f"Cannot read config {path}: {e}", path=path)
    except yaml.YAMLError as e:
        raise ConfigValidationError(f"{path}: malformed YAML: {e}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{path}: top level must be a mapping")
    return _validate(data, path)


def apply_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """
    Re-validate a config with higher-precedence values (CLI flags).

    Keys may be dotted ('paths.data_dir'); None values are ignored.
    """
    data = cfg.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return _validate(data, "overrides")


def dump_config(cfg: RunConfig, path: str) -> str:
    """Write the effective config; parse_config on the result gives back an equal RunConfig."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=False)
    return path

