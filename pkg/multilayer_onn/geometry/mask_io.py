# multilayer_onn/geometry/mask_io.py
# Purpose: Export and import weight masks as binary PGM rasters with JSON sidecars

"""
Module: mask_io.py
Purpose: Binary portable graymap (P5, 8 or 16 bit big-endian) reader/writer and the JSON
sidecar that carries window rectangles, shifts, geometry and quantization metadata.
"""

import dataclasses
import json
import os
from typing import Any, Dict, Optional, Tuple

import numpy as np

from multilayer_onn.errors import FormatError, ShapeError
from multilayer_onn.geometry.layout import (
    DetectorGrid,
    EmitterGrid,
    MaskPlane,
    StageGeometry,
    WeightMask,
    quantize,
)
from multilayer_onn.utils.logger import get_logger

logger = get_logger(__name__)

SIDECAR_VERSION = 1


def write_pgm(path: str, image: np.ndarray, maxval: int = 255) -> None:
    """
    Write a grayscale image as binary PGM.

    Args:
        path (str): Destination file.
        image (np.ndarray): 2D integer array with values in [0, maxval].
        maxval (int): 255 for 8-bit or up to 65535 for 16-bit output.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ShapeError(f"PGM image must be 2D, got shape {img.shape}", module="geometry")
    if not 0 < maxval <= 65535:
        raise FormatError(f"PGM maxval must be in 1..65535, got {maxval}", module="geometry")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    data = np.clip(img, 0, maxval).astype(dtype)
    height, width = data.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path: str) -> Tuple[np.ndarray, int]:
    """
    Read a binary PGM file.

    Args:
        path (str): Source file.

    Returns:
        Tuple[np.ndarray, int]: (height, width) integer image and its maxval.
    """
    with open(path, "rb") as f:
        blob = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"Truncated PGM header in {path}", module="geometry")
        tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"Not a binary PGM (P5) file: {path}", module="geometry")
    width, height, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    payload = blob[pos:pos + expected]
    if len(payload) != expected:
        raise FormatError(f"PGM payload holds {len(payload)} bytes, expected {expected}", module="geometry")
    image = np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.int64)
    return image, maxval


def geometry_to_dict(geom: StageGeometry) -> Dict[str, Any]:
    return dataclasses.asdict(geom)


def geometry_from_dict(data: Dict[str, Any]) -> StageGeometry:
    em = data["emitters"]
    de = data["detectors"]
    mk = data["mask"]
    return StageGeometry(
        emitters=EmitterGrid(em["rows"], em["cols"], em["pitch"], em["die_size"], tuple(em.get("origin", (0.0, 0.0)))),
        detectors=DetectorGrid(de["rows"], de["cols"], de["pitch"], de["active_size"], tuple(de.get("origin", (0.0, 0.0)))),
        mask=MaskPlane(mk["pixel_pitch"], tuple(mk["resolution"]), mk.get("gray_levels", 256)),
        d1=data["d1"],
        d2=data["d2"],
    )


def save_mask(mask: WeightMask, geom: StageGeometry, path: str, metadata: Optional[Dict[str, Any]] = None) -> Tuple[str, str]:
    """
    Save a mask as PGM plus a JSON sidecar next to it.

    Args:
        mask (WeightMask): Compiled mask.
        geom (StageGeometry): Geometry it was compiled for.
        path (str): PGM path; the sidecar replaces the extension with .json.
        metadata (Optional[Dict[str, Any]]): Extra entries (stage index, run id).

    Returns:
        Tuple[str, str]: Paths of the PGM and the sidecar.
    """
    maxval = 255 if mask.gray_levels <= 256 else 65535
    pixels = np.floor(mask.raster * maxval + 0.5).astype(np.int64)
    write_pgm(path, pixels, maxval)

    sidecar_path = os.path.splitext(path)[0] + ".json"
    sidecar = {
        "version": SIDECAR_VERSION,
        "pgm": os.path.basename(path),
        "bit_depth": 16 if maxval > 255 else 8,
        "gray_levels": int(mask.gray_levels),
        "guard": float(mask.guard),
        "windows": mask.rects.tolist(),
        "shifts": None if mask.shifts is None else mask.shifts.tolist(),
        "geometry": geometry_to_dict(geom),
        "metadata": metadata or {},
    }
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2)
    logger.info("Saved mask to %s", path, extra={"sidecar": sidecar_path})
    return path, sidecar_path


def load_mask(path: str) -> Tuple[WeightMask, StageGeometry]:
    """
    Load a mask written by save_mask.

    Args:
        path (str): PGM path (sidecar expected alongside).

    Returns:
        Tuple[WeightMask, StageGeometry]: Mask with quantized raster and its geometry.
    """
    sidecar_path = os.path.splitext(path)[0] + ".json"
    with open(sidecar_path, "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    if sidecar.get("version") != SIDECAR_VERSION:
        raise FormatError(f"Unsupported mask sidecar version {sidecar.get('version')}", module="geometry")
    pixels, maxval = read_pgm(path)
    gray_levels = int(sidecar["gray_levels"])
    raster = quantize(pixels / maxval, gray_levels)
    shifts = sidecar.get("shifts")
    mask = WeightMask(
        raster=raster,
        rects=np.asarray(sidecar["windows"], dtype=int),
        gray_levels=gray_levels,
        shifts=None if shifts is None else np.asarray(shifts, dtype=int),
        guard=float(sidecar.get("guard", 0.1)),
    )
    return mask, geometry_from_dict(sidecar["geometry"])


def save_shift_map(shifts: np.ndarray, mask_path: str) -> str:
    """Write an alignment shift map next to a mask's sidecar."""
    out = os.path.splitext(mask_path)[0] + ".shifts.json"
    with open(out, "w", encoding="utf-8") as f:
        json.dump({"version": SIDECAR_VERSION, "shifts": np.asarray(shifts, dtype=int).tolist()}, f)
    return out


def load_shift_map(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        return np.asarray(json.load(f)["shifts"], dtype=int)
