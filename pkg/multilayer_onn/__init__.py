# multilayer_onn/__init__.py
# Purpose: Initialize the multilayer_onn package

"""
Multilayer ONN Package.

A digital twin of a multilayer incoherent optoelectronic neural network: mask compilation,
optical and electronic simulation, hardware-constrained training, calibration and energy scaling.
"""

from pathlib import Path

# Read version from VERSION file
_version_file = Path(__file__).parent.parent / "VERSION"
try:
    __version__ = _version_file.read_text().strip()
except FileNotFoundError:
    __version__ = "unknown"

from .pipeline_runner import ExperimentRunner

__all__ = ["ExperimentRunner"]
