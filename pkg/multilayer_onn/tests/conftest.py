# multilayer_onn/tests/conftest.py
# Purpose: Shared fixtures for the simulator test suite

"""
Small stage geometries and datasets that keep every test fast.
"""

import numpy as np
import pytest

from multilayer_onn.datasets.dataset import LabeledDataset
from multilayer_onn.geometry.layout import DetectorGrid, EmitterGrid, MaskPlane, StageGeometry


@pytest.fixture
def small_stage():
    """2x2 LEDs over 2x2 photodiodes at M = 2; 10 x 10 pixel windows on a 128 x 128 mask."""
    return StageGeometry(
        emitters=EmitterGrid(2, 2, pitch=2160.0, die_size=10.0),
        detectors=DetectorGrid(2, 2, pitch=1080.0, active_size=800.0),
        mask=MaskPlane(pixel_pitch=36.0, resolution=(128, 128)),
        d1=1.0e5,
        d2=1.0e5,
    )


@pytest.fixture
def crosstalk_stage():
    """One LED over a 3x3 photodiode array whose spots spill onto their neighbours."""
    return StageGeometry(
        emitters=EmitterGrid(1, 1, pitch=400.0, die_size=400.0),
        detectors=DetectorGrid(3, 3, pitch=1080.0, active_size=900.0),
        mask=MaskPlane(pixel_pitch=36.0, resolution=(96, 96)),
        d1=1.0e4,
        d2=1.0e4,
    )


@pytest.fixture
def blobs():
    """Two well separated Gaussian blobs in the positive quadrant."""
    rng = np.random.default_rng(0)
    n = 200
    a = rng.normal([0.25, 0.75], 0.05, size=(n, 2))
    b = rng.normal([0.75, 0.25], 0.05, size=(n, 2))
    inputs = np.clip(np.vstack([a, b]), 0.0, 1.0)
    labels = np.concatenate([np.zeros(n, dtype=int), np.ones(n, dtype=int)])
    return LabeledDataset(inputs=inputs, labels=labels, n_classes=2)
