# multilayer_onn/geometry/__init__.py
# Purpose: Initialize the geometry sub-module

"""
Geometry module: stage layout, mask compilation, mask files and crosstalk estimates.
"""
