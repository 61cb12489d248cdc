# multilayer_onn/datasets/mnist.py
# Purpose: MNIST IDX ingestion and the 28x28 -> 8x8 input pipeline

"""
Module: mnist.py
Purpose: Parse MNIST from its native IDX files, downscale 28x28 digits to 7x7 by bilinear
interpolation, zero-pad to 8x8 and flatten to the 64 network inputs.
"""

import os
import struct
import time
from typing import Tuple

import numpy as np

from multilayer_onn.datasets.dataset import LabeledDataset
from multilayer_onn.errors import ConsistencyError, FormatError, LengthError, ShapeError
from multilayer_onn.utils.logger import get_logger, log_stage_summary

logger = get_logger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SOURCE_SIZE = 28
TARGET_SIZE = 7
FRAME_SIZE = 8


def _read_header(blob: bytes, magic: int, ndim: int, path: str) -> Tuple[int, ...]:
    need = 4 * (1 + ndim)
    if len(blob) < need:
        raise LengthError(f"{path}: header needs {need} bytes, file has {len(blob)}")
    found, *dims = struct.unpack(f">{1 + ndim}I", blob[:need])
    if found != magic:
        raise FormatError(f"{path}: magic 0x{found:08x} does not match expected 0x{magic:08x}")
    return tuple(dims)


def _read_idx(path: str, magic: int, ndim: int) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    dims = _read_header(blob, magic, ndim, path)
    offset = 4 * (1 + ndim)
    size = int(np.prod(dims))
    if len(blob) - offset < size:
        raise LengthError(f"{path}: expected {size} data bytes, found {len(blob) - offset}")
    return np.frombuffer(blob, dtype=np.uint8, count=size, offset=offset).reshape(dims)


def load_mnist_idx(images_path: str, labels_path: str) -> LabeledDataset:
    """
    Load an MNIST image/label file pair.

    Args:
        images_path (str): IDX3 image file (magic 0x00000803).
        labels_path (str): IDX1 label file (magic 0x00000801).

    Returns:
        LabeledDataset: (N, 784) inputs scaled to [0, 1] and 10 classes.
    """
    images = _read_idx(images_path, IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    logger.info("Loaded %d MNIST images", images.shape[0], extra={"path": images_path, "shape": list(images.shape)})
    return LabeledDataset(images.reshape(images.shape[0], -1) / 255.0, labels.astype(np.int64), n_classes=10)


def write_idx(images_path: str, labels_path: str, images: np.ndarray, labels: np.ndarray) -> None:
    """
    Serialize uint8 images (N, rows, cols) and labels (N,) in IDX format.
    """
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ShapeError(f"Images must be (N, rows, cols), got {images.shape}", module="datasets")
    for path in (images_path, labels_path):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def _bilinear_matrix(src: int, dst: int) -> np.ndarray:
    """(dst, src) interpolation weights sampling the source at pixel-centre-aligned points."""
    scale = src / dst
    pos = (np.arange(dst) + 0.5) * scale - 0.5
    lo = np.clip(np.floor(pos).astype(int), 0, src - 1)
    hi = np.clip(lo + 1, 0, src - 1)
    frac = pos - np.floor(pos)
    A = np.zeros((dst, src))
    A[np.arange(dst), lo] += 1.0 - frac
    A[np.arange(dst), hi] += frac
    return A


_DOWNSCALE = _bilinear_matrix(SOURCE_SIZE, TARGET_SIZE)


def downscale_bilinear(image: np.ndarray) -> np.ndarray:
    """
    Reduce a 28x28 image to 7x7.

    Output pixel k samples the source at coordinate 4k + 1.5 on each axis, i.e. the mean of
    source pixels 4k+1 and 4k+2. Accepts a single image or a (N, 28, 28) stack.

    Args:
        image (np.ndarray): Values in [0, 1].

    Returns:
        np.ndarray: (7, 7) or (N, 7, 7) image.
    """
    img = np.asarray(image, dtype=float)
    if img.shape[-2:] != (SOURCE_SIZE, SOURCE_SIZE):
        raise ShapeError(f"Expected 28x28 images, got {img.shape}", module="datasets")
    out = _DOWNSCALE @ img @ _DOWNSCALE.T
    return np.clip(out, 0.0, 1.0)


def pad_and_linearize(image: np.ndarray) -> np.ndarray:
    """
    Place a 7x7 image at the top-left of a zero 8x8 frame and flatten row-major.

    Args:
        image (np.ndarray): (7, 7) or (N, 7, 7).

    Returns:
        np.ndarray: (64,) or (N, 64).
    """
    img = np.asarray(image, dtype=float)
    if img.shape[-2:] != (TARGET_SIZE, TARGET_SIZE):
        raise ShapeError(f"Expected 7x7 images, got {img.shape}", module="datasets")
    frame = np.zeros(img.shape[:-2] + (FRAME_SIZE, FRAME_SIZE))
    frame[..., :TARGET_SIZE, :TARGET_SIZE] = img
    return frame.reshape(img.shape[:-2] + (FRAME_SIZE * FRAME_SIZE,))


def prepare_mnist(data: LabeledDataset) -> LabeledDataset:
    """Run downscale -> pad -> linearize over a raw 28x28 dataset, preserving order."""
    start = time.time()
    images = data.inputs.reshape(-1, SOURCE_SIZE, SOURCE_SIZE)
    inputs = pad_and_linearize(downscale_bilinear(images))
    log_stage_summary("prepare_mnist", time.time() - start, items=len(data))
    return LabeledDataset(inputs, data.labels.copy(), data.n_classes)
