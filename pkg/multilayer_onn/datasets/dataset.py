# multilayer_onn/datasets/dataset.py
# Purpose: Labeled dataset container, splitting and CSV exchange

"""
Module: dataset.py
Purpose: LabeledDataset plus the seeded 5:1 train/test split and CSV export/import.
"""

import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from multilayer_onn.errors import ConsistencyError, DomainError, FormatError, InvalidArgumentError
from multilayer_onn.utils.seeding import STREAM_SPLIT, derive_rng


@dataclass
class LabeledDataset:
    """
    Inputs in [0, 1]^d with integer class labels.

    Attributes:
        inputs (np.ndarray): (N, d) float array.
        labels (np.ndarray): (N,) int array.
        n_classes (int): Number of classes.
    """

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            self.inputs = self.inputs.reshape(len(self.inputs), -1)
        if len(self.inputs) != len(self.labels):
            raise ConsistencyError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")
        if self.n_classes < 1:
            raise InvalidArgumentError(f"n_classes must be >= 1, got {self.n_classes}", module="datasets")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DomainError(f"Labels must lie in [0, {self.n_classes})", module="datasets")
        if self.inputs.size and (not np.all(np.isfinite(self.inputs)) or self.inputs.min() < 0 or self.inputs.max() > 1):
            raise DomainError("Inputs must be finite and lie in [0, 1]", module="datasets")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, index: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.inputs[index], self.labels[index], self.n_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def split_dataset(data: LabeledDataset, seed: int, ratio: Tuple[int, int] = (5, 1)) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Seeded shuffle-and-split into train and test parts.

    Args:
        data (LabeledDataset): Full dataset.
        seed (int): Run seed.
        ratio (Tuple[int, int]): train:test proportions.

    Returns:
        Tuple[LabeledDataset, LabeledDataset]: (train, test).
    """
    order = derive_rng(seed, STREAM_SPLIT).permutation(len(data))
    n_train = int(round(len(data) * ratio[0] / (ratio[0] + ratio[1])))
    return data.subset(np.sort(order[:n_train])), data.subset(np.sort(order[n_train:]))


def save_dataset_csv(data: LabeledDataset, path: str) -> str:
    """
    Write a dataset as CSV with header x0..x{d-1},label.

    Args:
        data (LabeledDataset): Dataset to export.
        path (str): Destination file.

    Returns:
        str: The written path.
    """
    frame = pd.DataFrame(data.inputs, columns=[f"x{k}" for k in range(data.dim)])
    frame["label"] = data.labels
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def load_dataset_csv(path: str, n_classes: int) -> LabeledDataset:
    """Read a dataset written by save_dataset_csv."""
    frame = pd.read_csv(path)
    if "label" not in frame.columns:
        raise FormatError(f"{path} has no 'label' column")
    features = [c for c in frame.columns if c != "label"]
    return LabeledDataset(frame[features].to_numpy(dtype=float), frame["label"].to_numpy(dtype=np.int64), n_classes)
