# multilayer_onn/calibration/__init__.py
# Purpose: Initialize the calibration sub-module

"""
Calibration module: simulated probing, neuron exclusion, weight transfer and alignment.
"""
