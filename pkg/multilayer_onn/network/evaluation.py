# multilayer_onn/network/evaluation.py
# Purpose: Accuracy, confusion matrices, activation correlation and the linear baseline

"""
Module: evaluation.py
Purpose: Score a trained network at any fidelity level and fit the unconstrained linear
softmax baseline used for comparison.
"""

import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import optimize, stats

from multilayer_onn.datasets.dataset import LabeledDataset, split_dataset
from multilayer_onn.errors import InvalidArgumentError, ShapeError
from multilayer_onn.network.model import HardwareNetwork, NoisyFidelity, forward
from multilayer_onn.utils.logger import get_logger, log_stage_summary

logger = get_logger(__name__)


@dataclass
class EvaluationResult:
    """
    Attributes:
        accuracy (float): Fraction of correct predictions.
        confusion (np.ndarray): (n_classes, n_classes) over the network's classes, rows are true classes.
        correlations (List[float]): Pearson r per hidden layer against the algebraic level.
        fidelity (str): Level that produced the predictions.
    """

    accuracy: float
    confusion: np.ndarray
    correlations: List[float]
    fidelity: str


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if np.array_equal(a, b):
        return 1.0
    a, b = a.ravel(), b.ravel()
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(stats.pearsonr(a, b)[0])


def confusion_matrix(labels: np.ndarray, predicted: np.ndarray, n_classes: int) -> np.ndarray:
    """Counts of (true, predicted) pairs."""
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (labels, predicted), 1)
    return matrix


def evaluate(
    net: HardwareNetwork,
    dataset: LabeledDataset,
    fidelity: str = "algebraic",
    seed: int = 0,
    noisy: Optional[NoisyFidelity] = None,
    run_id: Optional[str] = None,
) -> EvaluationResult:
    """
    Run the dataset through one fidelity level.

    Args:
        net (HardwareNetwork): Trained network.
        dataset (LabeledDataset): Samples to score.
        fidelity (str): 'algebraic', 'raytraced' or 'noisy'.
        seed (int): Noise seed.
        noisy (Optional[NoisyFidelity]): Noisy level parameters.
        run_id (Optional[str]): Run ID for log records.

    Returns:
        EvaluationResult: Accuracy, confusion matrix and per-layer correlations.
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("Cannot evaluate an empty dataset", module="network")
    if dataset.n_classes > net.n_classes:
        raise ShapeError(f"Dataset has {dataset.n_classes} classes, network scores {net.n_classes}", module="network")
    start = time.time()
    result = forward(dataset.inputs, net, fidelity, seed, noisy)
    reference = result if fidelity == "algebraic" else forward(dataset.inputs, net, "algebraic")
    predicted = np.argmax(result.output[:, :net.n_classes], axis=1)
    # Square over every class the network scores, so each sample lands in exactly one cell.
    confusion = confusion_matrix(dataset.labels, predicted, net.n_classes)
    correlations = [_pearson(ref, act) for ref, act in zip(reference.activations, result.activations)]
    accuracy = float(np.mean(predicted == dataset.labels))
    log_stage_summary("evaluate", time.time() - start, run_id=run_id, fidelity=fidelity, accuracy=accuracy, samples=len(dataset))
    return EvaluationResult(accuracy=accuracy, confusion=confusion, correlations=correlations, fidelity=fidelity)


def _softmax_objective(params: np.ndarray, x: np.ndarray, onehot: np.ndarray, l2: float):
    d, c = x.shape[1], onehot.shape[1]
    W = params[: d * c].reshape(d, c)
    b = params[d * c:]
    logits = x @ W + b
    logits -= logits.max(axis=1, keepdims=True)
    log_prob = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    n = len(x)
    loss = -np.sum(onehot * log_prob) / n + 0.5 * l2 * np.sum(W * W)
    diff = (np.exp(log_prob) - onehot) / n
    grad = np.concatenate([(x.T @ diff + l2 * W).ravel(), diff.sum(axis=0)])
    return loss, grad


def linear_baseline(
    dataset: LabeledDataset,
    seed: int = 0,
    test: Optional[LabeledDataset] = None,
    l2: float = 1e-4,
    max_iter: int = 500,
) -> float:
    """
    Test accuracy of an unconstrained softmax regression.

    Args:
        dataset (LabeledDataset): Training data; split 5:1 when no test set is given.
        seed (int): Split seed.
        test (Optional[LabeledDataset]): Held-out data.
        l2 (float): Weight decay.
        max_iter (int): L-BFGS iteration cap.

    Returns:
        float: Accuracy in [0, 1].
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("Linear baseline needs a nonempty dataset", module="network")
    train_set = dataset
    if test is None:
        train_set, test = split_dataset(dataset, seed)
        if len(test) == 0:
            test = train_set
    classes = np.unique(train_set.labels)
    if len(classes) == 1:
        return float(np.mean(test.labels == classes[0]))

    start = time.time()
    c = dataset.n_classes
    onehot = np.eye(c)[train_set.labels]
    x0 = np.zeros(train_set.dim * c + c)
    fit = optimize.minimize(
        _softmax_objective, x0, args=(train_set.inputs, onehot, l2),
        jac=True, method="L-BFGS-B", options={"maxiter": max_iter},
    )
    W = fit.x[: train_set.dim * c].reshape(train_set.dim, c)
    b = fit.x[train_set.dim * c:]
    accuracy = float(np.mean(np.argmax(test.inputs @ W + b, axis=1) == test.labels))
    log_stage_summary("linear_baseline", time.time() - start, accuracy=accuracy, iterations=int(fit.nit))
    return accuracy
