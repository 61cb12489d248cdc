# multilayer_onn/electronics/__init__.py
# Purpose: Initialize the electronics sub-module

"""
Electronics module: neuron circuit, temporal settling and noise models.
"""
