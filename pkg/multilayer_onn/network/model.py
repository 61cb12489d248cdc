# multilayer_onn/network/model.py
# Purpose: Hardware-constrained network definition and multi-fidelity forward pass

"""
Module: model.py
Purpose: A stack of nonnegative n x 2m optical layers. Hidden layers pair their 2m detector
signals into m differencing neurons (PD 2k positive, PD 2k+1 negative); the output layer
returns its raw, nonnegative detector sums.

Fidelity levels:
    algebraic  ideal incoherent MVM.
    raytraced  per-stage transfer matrices from Monte Carlo ray tracing of compiled masks.
    noisy      per-instance weight perturbation, geometric crosstalk and additive detector noise.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from multilayer_onn.electronics.circuit import LedCurve, apply_led_nonlinearity
from multilayer_onn.electronics.noise import NoiseSpec, apply_noise, draw_weight_perturbation, emulate_offsets
from multilayer_onn.errors import ConfigurationError, DomainError, InvalidArgumentError, ShapeError
from multilayer_onn.geometry.layout import DEFAULT_GUARD, StageGeometry, WeightMask, compile_mask
from multilayer_onn.optics.ideal import ideal_mvm
from multilayer_onn.optics.raytrace import raytrace_transfer_matrix
from multilayer_onn.utils.seeding import STREAM_INIT, derive_rng

FIDELITIES = ("algebraic", "raytraced", "noisy")
DEFAULT_W_MIN = 0.01
DEFAULT_W_MAX = 1.0


@dataclass
class LayerSpec:
    """
    One optical stage plus its neurons.

    Attributes:
        n_in (int): Emitters feeding the stage.
        n_pairs (int): m; the stage has 2m detectors.
        w_min (float): Lower weight bound (residual extinction).
        w_max (float): Upper weight bound.
        offsets (np.ndarray): (m,) neuron offsets; unused on the output layer.
        is_output (bool): Output layers skip differencing.
        weights (np.ndarray): (n_in, 2m) nonnegative weights.
        gains (np.ndarray): (m,) neuron gains.
        usable (np.ndarray): (m,) False for neurons excluded by calibration.
    """

    n_in: int
    n_pairs: int
    w_min: float = DEFAULT_W_MIN
    w_max: float = DEFAULT_W_MAX
    offsets: Optional[np.ndarray] = None
    is_output: bool = False
    weights: Optional[np.ndarray] = None
    gains: Optional[np.ndarray] = None
    usable: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.n_in < 1 or self.n_pairs < 1:
            raise InvalidArgumentError(f"Layer needs n_in, n_pairs >= 1, got {self.n_in}, {self.n_pairs}", module="network")
        if not 0 <= self.w_min < self.w_max:
            raise InvalidArgumentError(f"Need 0 <= w_min < w_max, got {self.w_min}, {self.w_max}", module="network")
        m = self.n_pairs
        self.offsets = np.zeros(m) if self.offsets is None else np.asarray(self.offsets, dtype=float)
        self.gains = np.ones(m) if self.gains is None else np.asarray(self.gains, dtype=float)
        self.usable = np.ones(m, dtype=bool) if self.usable is None else np.asarray(self.usable, dtype=bool)
        if self.weights is None:
            self.weights = np.full((self.n_in, 2 * m), self.w_min)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.n_in, 2 * m):
            raise ShapeError(f"Weights {self.weights.shape} != {(self.n_in, 2 * m)}", module="network")
        for name in ("offsets", "gains", "usable"):
            if getattr(self, name).shape != (m,):
                raise ShapeError(f"{name} must have length {m}", module="network")
        if not np.all(np.isfinite(self.offsets)):
            raise InvalidArgumentError("Offsets must be finite", module="network")

    @property
    def n_out(self) -> int:
        return 2 * self.n_pairs

    def project(self) -> None:
        """Clamp weights into [w_min, w_max]."""
        np.clip(self.weights, self.w_min, self.w_max, out=self.weights)


@dataclass
class NoisyFidelity:
    """
    Parameters of the noisy fidelity level.

    Attributes:
        noise (NoiseSpec): Weight perturbation and additive detector noise.
        crosstalk (Optional[List[np.ndarray]]): Per-layer (2m, 2m) mixing matrices.
        offset_sigma (float): Std of emulated per-neuron offset errors.
    """

    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(relative_weight_sigma=0.05, pd_additive_sigma=0.01))
    crosstalk: Optional[List[np.ndarray]] = None
    offset_sigma: float = 0.0


@dataclass
class HardwareNetwork:
    """Ordered optical layers plus the LED response shared by all neurons."""

    layers: List[LayerSpec]
    n_classes: int = 10
    led_curve: LedCurve = field(default_factory=LedCurve)
    transfer: Optional[List[np.ndarray]] = None

    def __post_init__(self) -> None:
        if not self.layers:
            raise InvalidArgumentError("A network needs at least one layer", module="network")
        for k, (a, b) in enumerate(zip(self.layers[:-1], self.layers[1:])):
            if a.is_output or a.n_pairs != b.n_in:
                raise ShapeError(f"Layer {k} ({a.n_pairs} neurons) does not feed layer {k + 1} ({b.n_in} inputs)", module="network")
        if not self.layers[-1].is_output:
            raise InvalidArgumentError("The last layer must be an output layer", module="network")
        if not 1 <= self.n_classes <= self.layers[-1].n_out:
            raise InvalidArgumentError(f"n_classes must be in [1, {self.layers[-1].n_out}]", module="network")

    @classmethod
    def build(
        cls,
        n_in: int = 64,
        hidden: Sequence[int] = (50, 50),
        n_out: int = 64,
        n_classes: int = 10,
        w_min: float = DEFAULT_W_MIN,
        w_max: float = DEFAULT_W_MAX,
        seed: int = 0,
        led_curve: Optional[LedCurve] = None,
    ) -> "HardwareNetwork":
        """
        Build and initialize a network; weights start uniform in [w_min + 0.1 r, w_min + 0.5 r].

        Args:
            n_in (int): Input emitters.
            hidden (Sequence[int]): Neurons per hidden layer.
            n_out (int): Raw outputs (even).
            n_classes (int): Outputs used by the loss.
            w_min (float): Lower weight bound.
            w_max (float): Upper weight bound.
            seed (int): Initialization seed.
            led_curve (Optional[LedCurve]): LED response.

        Returns:
            HardwareNetwork: Freshly initialized network.
        """
        if n_out % 2:
            raise ShapeError(f"Output width must be even, got {n_out}", module="network")
        sizes = [n_in] + list(hidden)
        specs = [LayerSpec(sizes[k], sizes[k + 1], w_min, w_max) for k in range(len(hidden))]
        specs.append(LayerSpec(sizes[-1], n_out // 2, w_min, w_max, is_output=True))
        span = w_max - w_min
        for k, spec in enumerate(specs):
            rng = derive_rng(seed, STREAM_INIT, k)
            spec.weights = rng.uniform(w_min + 0.1 * span, w_min + 0.5 * span, size=(spec.n_in, spec.n_out))
        return cls(layers=specs, n_classes=n_classes, led_curve=led_curve or LedCurve())

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    def weights(self) -> List[np.ndarray]:
        return [layer.weights for layer in self.layers]

    def copy(self) -> "HardwareNetwork":
        layers = [
            LayerSpec(
                l.n_in, l.n_pairs, l.w_min, l.w_max, l.offsets.copy(), l.is_output,
                l.weights.copy(), l.gains.copy(), l.usable.copy(),
            )
            for l in self.layers
        ]
        transfer = None if self.transfer is None else [t.copy() for t in self.transfer]
        return HardwareNetwork(layers, self.n_classes, self.led_curve, transfer)


@dataclass
class ForwardResult:
    """Hidden activations (one (batch, m) array per hidden layer) and raw outputs."""

    activations: List[np.ndarray]
    output: np.ndarray


def pair_difference(signals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """
    Rectified differences of adjacent detector pairs.

    Args:
        signals (np.ndarray): (2m,) or (batch, 2m).
        offsets (np.ndarray): (m,) or broadcastable to (batch, m).

    Returns:
        np.ndarray: max(0, signals[2k] - signals[2k+1] + offsets[k]).
    """
    s = np.asarray(signals, dtype=float)
    if s.shape[-1] % 2:
        raise ShapeError(f"Pairing needs an even number of signals, got {s.shape[-1]}", module="network")
    return np.maximum(0.0, s[..., 0::2] - s[..., 1::2] + np.asarray(offsets, dtype=float))


def neuron_response(signals: np.ndarray, layer: LayerSpec, curve: LedCurve, offsets: Optional[np.ndarray] = None) -> np.ndarray:
    """Differencing neuron with gain, offset, LED curve and exclusion."""
    off = layer.offsets if offsets is None else offsets
    z = layer.gains * (signals[..., 0::2] - signals[..., 1::2]) + off
    return apply_led_nonlinearity(z, curve) * layer.usable


def _stage_signals(x: np.ndarray, k: int, net: HardwareNetwork, fidelity: str, noisy: Optional[NoisyFidelity], seed: int) -> np.ndarray:
    layer = net.layers[k]
    if fidelity == "raytraced":
        return x @ net.transfer[k]
    if fidelity == "algebraic":
        return ideal_mvm(x, layer.weights)
    spec = noisy.noise
    s = x @ (layer.weights * draw_weight_perturbation(layer.weights.shape, spec, instance=k))
    if noisy.crosstalk is not None and noisy.crosstalk[k] is not None:
        s = s @ noisy.crosstalk[k]
    return apply_noise(s, spec, seed=seed * 1009 + k)


def forward(
    inputs: np.ndarray,
    net: HardwareNetwork,
    fidelity: str = "algebraic",
    seed: int = 0,
    noisy: Optional[NoisyFidelity] = None,
) -> ForwardResult:
    """
    Propagate inputs through every stage.

    Args:
        inputs (np.ndarray): (n_in,) or (batch, n_in) values in [0, 1].
        net (HardwareNetwork): Network to evaluate.
        fidelity (str): 'algebraic', 'raytraced' or 'noisy'.
        seed (int): Seed for the additive noise draw.
        noisy (Optional[NoisyFidelity]): Parameters of the noisy level (defaults when omitted).

    Returns:
        ForwardResult: Per-hidden-layer activations and the raw output signals.
    """
    if fidelity not in FIDELITIES:
        raise InvalidArgumentError(f"Unknown fidelity '{fidelity}'", module="network")
    x = np.asarray(inputs, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != net.n_in:
        raise ShapeError(f"Expected {net.n_in} inputs, got {x.shape[1]}", module="network")
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("Network inputs must lie in [0, 1]", module="network")
    if fidelity == "raytraced" and (net.transfer is None or len(net.transfer) != len(net.layers)):
        raise ConfigurationError("Raytraced fidelity needs compiled masks; attach transfer matrices first")
    if fidelity == "noisy" and noisy is None:
        noisy = NoisyFidelity()

    activations = []
    for k, layer in enumerate(net.layers):
        s = _stage_signals(x, k, net, fidelity, noisy, seed)
        if layer.is_output:
            out = s
            break
        offsets = layer.offsets
        if fidelity == "noisy" and noisy.offset_sigma > 0:
            offsets = offsets + emulate_offsets(layer.n_pairs, noisy.offset_sigma, noisy.noise.seed, instance=k)
        x = neuron_response(s, layer, net.led_curve, offsets)
        activations.append(x[0] if single else x)
    return ForwardResult(activations=activations, output=out[0] if single else out)


def predict(net: HardwareNetwork, inputs: np.ndarray, fidelity: str = "algebraic", seed: int = 0, noisy: Optional[NoisyFidelity] = None) -> np.ndarray:
    """Class index per sample: argmax over the first n_classes outputs."""
    out = np.atleast_2d(forward(inputs, net, fidelity, seed, noisy).output)
    return np.argmax(out[:, :net.n_classes], axis=1)


def compile_network_masks(net: HardwareNetwork, geometries: Sequence[StageGeometry], guard: float = DEFAULT_GUARD, shifts: Optional[Sequence[Optional[np.ndarray]]] = None) -> List[WeightMask]:
    """
    Rasterize every layer's weights (divided by w_max) into its stage mask.

    Args:
        net (HardwareNetwork): Network whose weights are compiled.
        geometries (Sequence[StageGeometry]): One geometry per layer.
        guard (float): Window guard fraction.
        shifts (Optional[Sequence[Optional[np.ndarray]]]): Per-layer window shift maps.

    Returns:
        List[WeightMask]: One mask per layer.
    """
    if len(geometries) != len(net.layers):
        raise ConfigurationError(f"{len(geometries)} stage geometries for {len(net.layers)} layers")
    shifts = shifts or [None] * len(net.layers)
    return [
        compile_mask(layer.weights / layer.w_max, geom, guard, shift)
        for layer, geom, shift in zip(net.layers, geometries, shifts)
    ]


def attach_raytraced_optics(
    net: HardwareNetwork,
    geometries: Sequence[StageGeometry],
    masks: Sequence[WeightMask],
    rays_per_led: int,
    seed: int,
    threads: Optional[int] = None,
) -> HardwareNetwork:
    """
    Ray trace each compiled mask and store the resulting transfer matrices on the network.

    Matrices are rescaled by w_max so the raytraced level is on the algebraic scale.
    """
    if len(masks) != len(net.layers):
        raise ConfigurationError(f"{len(masks)} compiled masks for {len(net.layers)} layers")
    net.transfer = [
        layer.w_max * raytrace_transfer_matrix(geom, mask, rays_per_led, seed + 7919 * k, threads=threads)
        for k, (layer, geom, mask) in enumerate(zip(net.layers, geometries, masks))
    ]
    return net
