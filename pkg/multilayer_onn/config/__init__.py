# multilayer_onn/config/__init__.py
# Purpose: Initialize the config sub-module

"""
Configuration module: environment settings and the strict YAML run-config schema.
"""
