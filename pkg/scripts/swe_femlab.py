#!/usr/bin/env python3
"""
swe-femlab experiment runner.

Usage:
    PYTHONPATH=. python scripts/swe_femlab.py balance --distortion 0.2
    PYTHONPATH=. python scripts/swe_femlab.py steady --config steady.cfg --ro 1 --fr 0.5
    PYTHONPATH=. python scripts/swe_femlab.py kelvin-circular --t-end 100 --output-dir output/kelvin
    PYTHONPATH=. python scripts/swe_femlab.py kelvin-converge --threads 3 --no-deterministic
    PYTHONPATH=. python scripts/swe_femlab.py spectrum --edge-length 0.125
"""

import sys

from dotenv import load_dotenv
load_dotenv()

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
