# multilayer_onn/network/checkpoint.py
# Purpose: Persist trained networks and training artifacts

"""
Module: checkpoint.py
Purpose: JSON checkpoints (format version 1) holding architecture, weights, offsets, gains,
bounds and training metadata, plus CSV exports of loss curves and confusion matrices.
"""

import json
import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from multilayer_onn.electronics.circuit import LedCurve
from multilayer_onn.errors import FormatError
from multilayer_onn.network.model import HardwareNetwork, LayerSpec

CHECKPOINT_VERSION = 1


def save_checkpoint(net: HardwareNetwork, path: str, metadata: Optional[Dict[str, Any]] = None) -> str:
    """
    Write a network to JSON.

    Args:
        net (HardwareNetwork): Network to store.
        path (str): Destination file.
        metadata (Optional[Dict[str, Any]]): Training metadata (seed, config, accuracies).

    Returns:
        str: The written path.
    """
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": [net.n_in] + [layer.n_pairs for layer in net.layers[:-1]] + [net.layers[-1].n_out],
        "n_classes": net.n_classes,
        "led_curve": {"kind": net.led_curve.kind, "scale": net.led_curve.scale},
        "layers": [
            {
                "n_in": layer.n_in,
                "n_pairs": layer.n_pairs,
                "is_output": layer.is_output,
                "w_min": layer.w_min,
                "w_max": layer.w_max,
                "weights": layer.weights.tolist(),
                "offsets": layer.offsets.tolist(),
                "gains": layer.gains.tolist(),
                "usable": layer.usable.tolist(),
            }
            for layer in net.layers
        ],
        "metadata": metadata or {},
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
    return path


def load_checkpoint(path: str) -> Tuple[HardwareNetwork, Dict[str, Any]]:
    """Read a checkpoint written by save_checkpoint; returns the network and its metadata."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path} is not valid JSON: {e}", module="network")
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}", module="network")
    try:
        layers = [
            LayerSpec(
                n_in=l["n_in"], n_pairs=l["n_pairs"], w_min=l["w_min"], w_max=l["w_max"],
                offsets=np.array(l["offsets"], dtype=float), is_output=l["is_output"],
                weights=np.array(l["weights"], dtype=float), gains=np.array(l["gains"], dtype=float),
                usable=np.array(l["usable"], dtype=bool),
            )
            for l in doc["layers"]
        ]
        curve = LedCurve(**doc["led_curve"])
        net = HardwareNetwork(layers=layers, n_classes=doc["n_classes"], led_curve=curve)
    except KeyError as e:
        raise FormatError(f"{path}: missing checkpoint field {e}", module="network")
    return net, doc.get("metadata", {})


def write_loss_curve_csv(curve: List[Dict[str, Any]], path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pd.DataFrame(curve).to_csv(path, index=False)
    return path


def write_confusion_csv(confusion: np.ndarray, path: str) -> str:
    """Rows are true classes, columns predicted classes."""
    n = confusion.shape[0]
    frame = pd.DataFrame(confusion, index=[f"true_{k}" for k in range(n)], columns=[f"pred_{k}" for k in range(n)])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index_label="class")
    return path
