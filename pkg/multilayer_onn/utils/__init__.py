# multilayer_onn/utils/__init__.py
# Purpose: Initialize the utils sub-module

"""
Utilities module for logging, metrics, seeding and thread-pool helpers.
"""
