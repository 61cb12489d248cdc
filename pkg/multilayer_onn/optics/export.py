# multilayer_onn/optics/export.py
# Purpose: Dump detector signals and intensity maps for figure reproduction

"""
Module: export.py
Purpose: CSV of per-detector powers and PGM snapshots of photodiode-plane intensity maps.
"""

import os
from typing import Dict, Optional

import numpy as np
import pandas as pd

from multilayer_onn.geometry.mask_io import write_pgm


def write_signal_csv(path: str, signals: Dict[str, np.ndarray]) -> str:
    """
    Write per-detector signals of one or more fidelity levels side by side.

    Args:
        path (str): Output CSV path.
        signals (Dict[str, np.ndarray]): Column name -> (p,) signal.

    Returns:
        str: The written path.
    """
    frame = pd.DataFrame({"detector": np.arange(len(next(iter(signals.values()))))})
    for name, values in signals.items():
        frame[name] = np.asarray(values, dtype=float)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def write_intensity_pgm(path: str, intensity: np.ndarray, peak: Optional[float] = None) -> str:
    """Save an intensity map as a 16-bit PGM scaled to its peak."""
    peak = float(intensity.max()) if peak is None else float(peak)
    scaled = np.zeros_like(intensity) if peak <= 0 else np.clip(intensity / peak, 0.0, 1.0)
    write_pgm(path, np.floor(scaled * 65535 + 0.5).astype(np.int64), maxval=65535)
    return path
