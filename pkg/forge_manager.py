#!/usr/bin/python3
"""
Forge Manager - entry script
Usage: forge_manager.py [--json] [--seed N] [--jobs N] [--cap N] <command> ...
"""

import sys

from hamming_forge.experiment_manager import main

if __name__ == "__main__":
    sys.exit(main())
