"""
main.py
=======

Entry point for **Fair Prep** – task-tailored fairness pre-processing for tabular data.

Dispatches to the config-driven subcommands (train, transform, evaluate, sweep, report)
and turns their outcome into the process exit code.

Usage:
    python main.py sweep --config configs/toy_classification.json --runs 2
    python main.py train --config configs/toy_regression.json --out runs/toy
    python main.py report --reports runs/toy/reports --out runs/toy

License     : MIT License
Dependencies: numpy, scipy, pandas, python-dotenv, cryptography
"""

import os
import sys

# -----------------------------------------------------
# Add current directory to sys.path to safely import packages
# -----------------------------------------------------
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from cli.commands import main  # noqa: E402

# -----------------------------------------------------
# Run Main
# -----------------------------------------------------
if __name__ == "__main__":
    sys.exit(main())
