# multilayer_onn/datasets/__init__.py
# Purpose: Initialize the datasets sub-module

"""
Datasets module: MNIST IDX ingestion, downscaling and the spiral problem.
"""
