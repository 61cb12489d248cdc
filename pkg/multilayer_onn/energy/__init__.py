# multilayer_onn/energy/__init__.py
# Purpose: Initialize the energy sub-module

"""
Energy module: operation counting, power budgets and the diffraction array limit.
"""
