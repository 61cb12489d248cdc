# multilayer_onn/__main__.py
# Purpose: Allow `python -m multilayer_onn`

"""
Command-line entry for running the simulator as a module.
"""

import sys

from multilayer_onn.cli import main

if __name__ == "__main__":
    sys.exit(main())
