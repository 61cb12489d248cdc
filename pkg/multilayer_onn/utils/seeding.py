# multilayer_onn/utils/seeding.py
# Purpose: Derive independent, reproducible random streams from one run seed

"""
Every stochastic stage draws from `derive_rng(seed, *stream)`. The stream key is a tuple of
small integers (stage tag, emitter index, batch index, ...), so results depend only on the seed
and the work decomposition, never on thread scheduling.
"""

from typing import Sequence

import numpy as np

# Stream tags keep stages from sharing a random sequence under the same seed.
STREAM_RAYTRACE = 1
STREAM_DIFFRACTION = 2
STREAM_NOISE = 3
STREAM_WEIGHT_PERTURB = 4
STREAM_OFFSETS = 5
STREAM_TRAIN = 6
STREAM_INIT = 7
STREAM_AUGMENT = 8
STREAM_SPLIT = 9
STREAM_SPIRAL = 10
STREAM_CALIBRATION = 11
STREAM_ALIGNMENT = 12


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Build a generator for one (seed, stream) pair.

    Args:
        seed (int): Run seed (non-negative).
        *stream (int): Stream key components.

    Returns:
        np.random.Generator: PCG64 generator seeded from the full key.
    """
    key: Sequence[int] = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) for s in stream]
    return np.random.default_rng(key)
