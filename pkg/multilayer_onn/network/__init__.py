# multilayer_onn/network/__init__.py
# Purpose: Initialize the network sub-module

"""
Network module: hardware-constrained layers, training, evaluation and checkpoints.
"""
