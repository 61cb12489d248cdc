# multilayer_onn/optics/ideal.py
# Purpose: Ideal incoherent matrix-vector multiplication

"""
Module: ideal.py
Purpose: The algebraic fidelity level. Intensities add incoherently, so every detector sees
O_j = sum_i I_i * w_ij.
"""

import numpy as np

from multilayer_onn.errors import DomainError, InvalidArgumentError, ShapeError


def ideal_mvm(intensities: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Detector signals of an ideal optical stage.

    Args:
        intensities (np.ndarray): (n,) or (batch, n) nonnegative emitter intensities.
        weights (np.ndarray): (n, p) nonnegative transmission weights.

    Returns:
        np.ndarray: (p,) or (batch, p) detector signals.
    """
    I = np.asarray(intensities, dtype=float)
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2 or I.ndim not in (1, 2) or I.shape[-1] != W.shape[0]:
        raise ShapeError(f"Cannot multiply intensities {I.shape} by weights {W.shape}", module="optics")
    if not (np.all(np.isfinite(I)) and np.all(np.isfinite(W))):
        raise InvalidArgumentError("Intensities and weights must be finite", module="optics")
    if np.any(I < 0) or np.any(W < 0):
        raise DomainError("Optical intensities and weights must be nonnegative", module="optics")
    return I @ W
