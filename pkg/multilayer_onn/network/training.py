# multilayer_onn/network/training.py
# Purpose: Analytic backpropagation, projected Adam and gradient checking

"""
Module: training.py
Purpose: Train a HardwareNetwork from scratch.

Loss is softmax cross-entropy on the first n_classes raw outputs. Gradients flow through the
nonnegative MVM, the optional per-window crosstalk mixing, the differencing neurons and the
LED curve. The weight clamp uses projected-gradient semantics: a gradient component is dropped
only where the weight sits on a bound and the step would push it outside; after every Adam step
the weights are clipped back into [w_min, w_max].
"""

import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from multilayer_onn.datasets.dataset import LabeledDataset
from multilayer_onn.electronics.circuit import apply_led_nonlinearity, led_derivative
from multilayer_onn.errors import (
    ConfigurationError,
    InconclusiveCheckError,
    InvalidArgumentError,
    ShapeError,
    TrainingDivergedError,
)
from multilayer_onn.geometry.crosstalk import overlap_crosstalk, window_coupling
from multilayer_onn.geometry.layout import DEFAULT_GUARD, StageGeometry
from multilayer_onn.network.model import HardwareNetwork, predict
from multilayer_onn.utils.logger import get_logger, log_stage_summary
from multilayer_onn.utils.metrics import metrics_collector
from multilayer_onn.utils.seeding import STREAM_AUGMENT, STREAM_TRAIN, derive_rng

logger = get_logger(__name__)


@dataclass
class TrainConfig:
    """
    Optimizer and augmentation settings.

    Augmentation is applied per batch and per kind with probability `augment_probability`:
    crosstalk from windows each shifted independently by up to `crosstalk_shift` detector
    pitches, Gaussian offset perturbations, and multiplicative Gaussian activation perturbations.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 128
    epochs: int = 30
    seed: int = 0
    augment: bool = True
    augment_probability: float = 0.5
    crosstalk_shift: float = 0.2
    offset_sigma: float = 0.02
    activation_sigma: float = 0.05
    learn_offsets: bool = False
    offset_limit: float = 1.0
    guard: float = DEFAULT_GUARD

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise InvalidArgumentError("Learning rate and epsilon must be positive", module="network")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgumentError("Adam betas must lie in [0, 1)", module="network")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidArgumentError("batch_size must be >= 1 and epochs >= 0", module="network")
        if min(self.crosstalk_shift, self.offset_sigma, self.activation_sigma) < 0:
            raise InvalidArgumentError("Augmentation magnitudes must be nonnegative", module="network")
        if not 0 <= self.augment_probability <= 1:
            raise InvalidArgumentError("augment_probability must be in [0, 1]", module="network")
        if self.offset_limit < 0:
            raise InvalidArgumentError("offset_limit must be nonnegative", module="network")


@dataclass
class Gradients:
    """Per-layer weight gradients and hidden-layer offset gradients (None on the output layer)."""

    weights: List[np.ndarray]
    offsets: List[Optional[np.ndarray]]


@dataclass
class Augmentation:
    """
    Perturbations for one batch; None entries disable that perturbation for the layer.

    crosstalk[k] has shape (n, p, p): entry (i, j, q) is the share of window (i, j)'s light that
    reaches detector q once that window is displaced.
    """

    crosstalk: List[Optional[np.ndarray]]
    offsets: List[Optional[np.ndarray]]
    activations: List[Optional[np.ndarray]]


@dataclass
class TrainResult:
    net: HardwareNetwork
    loss_curve: List[Dict[str, Any]] = field(default_factory=list)


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params: Sequence[np.ndarray], lr: float, beta1: float, beta2: float, eps: float) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def project_gradient(weights: np.ndarray, grad: np.ndarray, w_min: float, w_max: float) -> np.ndarray:
    """Zero gradient components that would push a weight sitting on a bound outside it."""
    blocked = ((weights <= w_min) & (grad > 0)) | ((weights >= w_max) & (grad < 0))
    return np.where(blocked, 0.0, grad)


def _forward_cached(net: HardwareNetwork, x: np.ndarray, aug: Optional[Augmentation]) -> Tuple[np.ndarray, Dict[str, list]]:
    cache: Dict[str, list] = {"inputs": [], "drives": [], "factors": [], "mixed": []}
    a = x
    for k, layer in enumerate(net.layers):
        cache["inputs"].append(a)
        weights = layer.weights
        if aug is not None and aug.crosstalk[k] is not None:
            weights = np.einsum("ij,ijq->iq", weights, aug.crosstalk[k])
        cache["mixed"].append(weights)
        s = a @ weights
        if layer.is_output:
            return s, cache
        offsets = layer.offsets
        if aug is not None and aug.offsets[k] is not None:
            offsets = offsets + aug.offsets[k]
        z = layer.gains * (s[:, 0::2] - s[:, 1::2]) + offsets
        a = apply_led_nonlinearity(z, net.led_curve) * layer.usable
        factor = None if aug is None else aug.activations[k]
        if factor is not None:
            a = a * factor
        cache["drives"].append(z)
        cache["factors"].append(factor)
    raise ConfigurationError("Network has no output layer")


def _cross_entropy(out: np.ndarray, labels: np.ndarray, n_classes: int) -> Tuple[float, np.ndarray]:
    logits = out[:, :n_classes]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_prob = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(len(labels))
    loss = float(-log_prob[rows, labels].mean())
    grad = np.zeros_like(out)
    probs = np.exp(log_prob)
    probs[rows, labels] -= 1.0
    grad[:, :n_classes] = probs / len(labels)
    return loss, grad


def loss_and_gradients(
    net: HardwareNetwork,
    inputs: np.ndarray,
    labels: np.ndarray,
    augmentation: Optional[Augmentation] = None,
) -> Tuple[float, Gradients]:
    """
    Mean softmax cross-entropy over a batch and its analytic gradients.

    Args:
        net (HardwareNetwork): Network (not modified).
        inputs (np.ndarray): (batch, n_in).
        labels (np.ndarray): (batch,) class indices.
        augmentation (Optional[Augmentation]): Batch perturbations.

    Returns:
        Tuple[float, Gradients]: Loss and gradients with respect to every weight and hidden offset.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    out, cache = _forward_cached(net, x, augmentation)
    loss, g = _cross_entropy(out, y, net.n_classes)

    n_layers = len(net.layers)
    w_grads: List[np.ndarray] = [None] * n_layers
    b_grads: List[Optional[np.ndarray]] = [None] * n_layers
    for k in reversed(range(n_layers)):
        layer = net.layers[k]
        if layer.is_output:
            gs = g
        else:
            factor = cache["factors"][k]
            ga = g if factor is None else g * factor
            gz = ga * layer.usable * led_derivative(cache["drives"][k], net.led_curve)
            b_grads[k] = gz.sum(axis=0)
            gs = np.empty((gz.shape[0], layer.n_out))
            gs[:, 0::2] = gz * layer.gains
            gs[:, 1::2] = -gz * layer.gains
        w_grads[k] = cache["inputs"][k].T @ gs
        if augmentation is not None and augmentation.crosstalk[k] is not None:
            w_grads[k] = np.einsum("iq,ijq->ij", w_grads[k], augmentation.crosstalk[k])
        g = gs @ cache["mixed"][k].T
    return loss, Gradients(weights=w_grads, offsets=b_grads)


def _crosstalk_references(net: HardwareNetwork, geometries: Optional[Sequence[StageGeometry]], guard: float) -> List[Optional[float]]:
    if geometries is None:
        return [None] * len(net.layers)
    if len(geometries) != len(net.layers):
        raise ConfigurationError(f"{len(geometries)} stage geometries for {len(net.layers)} layers")
    refs = []
    for k, (geom, layer) in enumerate(zip(geometries, net.layers)):
        if (geom.n_in, geom.n_out) != (layer.n_in, layer.n_out):
            raise ConfigurationError(f"Stage {k} geometry {(geom.n_in, geom.n_out)} does not match layer {(layer.n_in, layer.n_out)}")
        own = float(np.mean(np.diag(overlap_crosstalk(geom, (0.0, 0.0), guard=guard))))
        if own <= 0:
            raise ConfigurationError(f"Stage {k} windows do not reach their detectors")
        refs.append(own)
    return refs


def draw_augmentation(
    net: HardwareNetwork,
    cfg: TrainConfig,
    batch: int,
    rng: np.random.Generator,
    geometries: Optional[Sequence[StageGeometry]] = None,
    references: Optional[List[Optional[float]]] = None,
) -> Augmentation:
    """
    Sample one batch's perturbations.

    Every window draws its own shift. Crosstalk tensors are normalized by the unshifted
    own-detector overlap, so an aligned layout leaves the signal scale unchanged.
    """
    if references is None:
        references = _crosstalk_references(net, geometries, cfg.guard)
    n_layers = len(net.layers)
    crosstalk: List[Optional[np.ndarray]] = [None] * n_layers
    offsets: List[Optional[np.ndarray]] = [None] * n_layers
    activations: List[Optional[np.ndarray]] = [None] * n_layers
    p = cfg.augment_probability
    for k, layer in enumerate(net.layers):
        if geometries is not None and rng.random() < p and cfg.crosstalk_shift > 0:
            geom = geometries[k]
            # shifts drawn in detector pitches, applied in mask pixels
            pitches = rng.uniform(-cfg.crosstalk_shift, cfg.crosstalk_shift, size=(layer.n_in, layer.n_out, 2))
            pixels = pitches * geom.detectors.pitch / (geom.magnification * geom.mask.pixel_pitch)
            crosstalk[k] = window_coupling(geom, pixels, cfg.guard) / references[k]
        if layer.is_output:
            continue
        if rng.random() < p and cfg.offset_sigma > 0:
            offsets[k] = rng.normal(0.0, cfg.offset_sigma, size=(batch, layer.n_pairs))
        if rng.random() < p and cfg.activation_sigma > 0:
            activations[k] = np.maximum(0.0, 1.0 + rng.normal(0.0, cfg.activation_sigma, size=(batch, layer.n_pairs)))
    return Augmentation(crosstalk=crosstalk, offsets=offsets, activations=activations)


def _accuracy(net: HardwareNetwork, data: LabeledDataset) -> float:
    return float(np.mean(predict(net, data.inputs) == data.labels))


def train(
    dataset: LabeledDataset,
    net: HardwareNetwork,
    cfg: TrainConfig,
    test: Optional[LabeledDataset] = None,
    geometries: Optional[Sequence[StageGeometry]] = None,
    run_id: Optional[str] = None,
) -> TrainResult:
    """
    Train a copy of `net` with projected Adam.

    Args:
        dataset (LabeledDataset): Training data.
        net (HardwareNetwork): Architecture and initial weights (left untouched).
        cfg (TrainConfig): Optimizer and augmentation settings.
        test (Optional[LabeledDataset]): Scored after every epoch when given.
        geometries (Optional[Sequence[StageGeometry]]): Per-layer stage geometry; enables crosstalk augmentation.
        run_id (Optional[str]): Run ID for log records.

    Returns:
        TrainResult: Trained network and one loss-curve row per epoch.
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("Training set is empty", module="network")
    if dataset.dim != net.n_in:
        raise ShapeError(f"Dataset has {dataset.dim} features, network expects {net.n_in}", module="network")
    if dataset.n_classes > net.n_classes:
        raise ShapeError(f"Dataset has {dataset.n_classes} classes, network scores {net.n_classes}", module="network")

    model = net.copy()
    hidden = [k for k, layer in enumerate(model.layers) if not layer.is_output]
    params: List[np.ndarray] = [layer.weights for layer in model.layers]
    if cfg.learn_offsets:
        params += [model.layers[k].offsets for k in hidden]
    adam = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    references = _crosstalk_references(model, geometries, cfg.guard) if cfg.augment else None

    result = TrainResult(net=model)
    n = len(dataset)
    for epoch in range(cfg.epochs):
        start = time.time()
        order = derive_rng(cfg.seed, STREAM_TRAIN, epoch).permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            aug = None
            if cfg.augment:
                rng = derive_rng(cfg.seed, STREAM_AUGMENT, epoch, b)
                aug = draw_augmentation(model, cfg, len(idx), rng, geometries, references)
            loss, grads = loss_and_gradients(model, dataset.inputs[idx], dataset.labels[idx], aug)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.weights):
                raise TrainingDivergedError(
                    f"Loss became non-finite at epoch {epoch}, batch {b}",
                    diagnostics={
                        "epoch": epoch,
                        "batch": b,
                        "loss": float(loss),
                        "max_abs_weight": float(max(np.abs(l.weights).max() for l in model.layers)),
                    },
                )
            step_grads = [
                project_gradient(layer.weights, g, layer.w_min, layer.w_max)
                for layer, g in zip(model.layers, grads.weights)
            ]
            if cfg.learn_offsets:
                step_grads += [grads.offsets[k] for k in hidden]
            adam.step(params, step_grads)
            for layer in model.layers:
                layer.project()
            if cfg.learn_offsets:
                for k in hidden:
                    np.clip(model.layers[k].offsets, -cfg.offset_limit, cfg.offset_limit, out=model.layers[k].offsets)
            total += loss * len(idx)

        row: Dict[str, Any] = {"epoch": epoch + 1, "loss": total / n, "train_accuracy": _accuracy(model, dataset)}
        if test is not None and len(test):
            row["test_accuracy"] = _accuracy(model, test)
        result.loss_curve.append(row)
        metrics_collector.record_epoch()
        log_stage_summary("train_epoch", time.time() - start, run_id=run_id, **row)
    return result


def gradient_check(
    net: HardwareNetwork,
    inputs: np.ndarray,
    label: int,
    epsilon: float = 1e-5,
    analytic: Optional[Gradients] = None,
    augmentation: Optional[Augmentation] = None,
) -> float:
    """
    Compare analytic gradients with central finite differences.

    Relative error per parameter is |a - n| / max(|a|, |n|, 1e-4).

    Args:
        net (HardwareNetwork): Network to probe (restored afterwards).
        inputs (np.ndarray): One input vector.
        label (int): Its class.
        epsilon (float): Finite-difference step.
        analytic (Optional[Gradients]): Gradients to test; computed when omitted.
        augmentation (Optional[Augmentation]): Perturbations held fixed during the check.

    Returns:
        float: Largest relative error over all weights and hidden offsets.

    Raises:
        InconclusiveCheckError: A weight lies within epsilon of a bound or a neuron drive lies
            within 10 * epsilon of the rectification kink.
    """
    if epsilon <= 0:
        raise InvalidArgumentError("epsilon must be positive", module="network")
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.array([int(label)])
    for k, layer in enumerate(net.layers):
        if np.any(layer.weights <= layer.w_min + epsilon) or np.any(layer.weights >= layer.w_max - epsilon):
            raise InconclusiveCheckError(f"Layer {k} has weights within epsilon of a bound")
    _, cache = _forward_cached(net, x, augmentation)
    for k, z in enumerate(cache["drives"]):
        if np.any(np.abs(z[:, net.layers[k].usable]) <= 10 * epsilon):
            raise InconclusiveCheckError(f"Layer {k} has a neuron drive within 10*epsilon of the kink")

    if analytic is None:
        _, analytic = loss_and_gradients(net, x, y, augmentation)

    def loss_at() -> float:
        return loss_and_gradients(net, x, y, augmentation)[0]

    worst = 0.0
    pairs = [(layer.weights, analytic.weights[k]) for k, layer in enumerate(net.layers)]
    pairs += [(net.layers[k].offsets, g) for k, g in enumerate(analytic.offsets) if g is not None]
    for param, grad in pairs:
        for i in np.ndindex(param.shape):
            keep = param[i]
            param[i] = keep + epsilon
            up = loss_at()
            param[i] = keep - epsilon
            down = loss_at()
            param[i] = keep
            numeric = (up - down) / (2 * epsilon)
            a = float(grad[i])
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-4))
    logger.debug("Gradient check finished", extra={"max_relative_error": worst})
    return worst
