# multilayer_onn/optics/__init__.py
# Purpose: Initialize the optics sub-module

"""
Optics module: ideal, ray-traced and diffraction-limited light propagation.
"""
