# setup.py
# Purpose: Setup script for the Multilayer ONN package

"""
Setup script for installing the multilayer_onn package.
"""

from setuptools import setup, find_packages

setup(
    name="multilayer_onn",
    version=open("VERSION").read().strip(),
    packages=find_packages(exclude=["examples", "examples.*"]),
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "pydantic>=2",
        "pyyaml",
        "python-dotenv",
        "python-json-logger",
        "prometheus-client",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={
        "console_scripts": [
            "multilayer-onn=multilayer_onn.cli:main",
        ],
    },
    description="Digital twin of a multilayer incoherent optoelectronic neural network.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
)
