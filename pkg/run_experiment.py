#!/usr/bin/env python3
"""Experiment runner for the multi-source posterior estimation benchmarks.

Examples:
    python run_experiment.py run --profile exp1-small
    python run_experiment.py train --profile exp2-small --set train.epochs=5 --seed 0
    python run_experiment.py report --out results/exp1-small --plots
"""

import sys

from src.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
