# multilayer_onn/datasets/spiral.py
# Purpose: Four-arm spiral classification problem

"""
Module: spiral.py
Purpose: Generate the two-input, four-class spiral dataset. Defaults are tuned so an
unconstrained linear classifier lands near 30% accuracy.
"""

import numpy as np

from multilayer_onn.datasets.dataset import LabeledDataset
from multilayer_onn.errors import InvalidArgumentError
from multilayer_onn.utils.seeding import STREAM_SPIRAL, derive_rng

SPIRAL_CLASSES = 4
DEFAULT_TURNS = 1.75
DEFAULT_NOISE_SIGMA = 0.2


def spiral_dataset(
    per_class: int,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    turns: float = DEFAULT_TURNS,
    seed: int = 0,
) -> LabeledDataset:
    """
    Sample the spiral arms.

    Class c: t ~ U[0, 1], r = t, theta = 2 pi turns t + c pi/2 + N(0, noise_sigma^2);
    points (r cos theta, r sin theta) are mapped to [0, 1]^2 by (p + 1) / 2.

    Args:
        per_class (int): Samples per arm.
        noise_sigma (float): Angular jitter in radians.
        turns (float): Revolutions of each arm.
        seed (int): Run seed.

    Returns:
        LabeledDataset: 4 * per_class samples grouped by class.
    """
    if per_class < 1:
        raise InvalidArgumentError(f"per_class must be >= 1, got {per_class}", module="datasets")
    if noise_sigma < 0:
        raise InvalidArgumentError(f"noise_sigma must be >= 0, got {noise_sigma}", module="datasets")
    rng = derive_rng(seed, STREAM_SPIRAL)
    points = []
    labels = []
    for c in range(SPIRAL_CLASSES):
        t = rng.random(per_class)
        theta = 2.0 * np.pi * turns * t + c * np.pi / 2.0
        if noise_sigma > 0:
            theta = theta + rng.normal(0.0, noise_sigma, per_class)
        points.append(np.stack([t * np.cos(theta), t * np.sin(theta)], axis=1))
        labels.append(np.full(per_class, c))
    xy = (np.concatenate(points) + 1.0) / 2.0
    return LabeledDataset(np.clip(xy, 0.0, 1.0), np.concatenate(labels), SPIRAL_CLASSES)
