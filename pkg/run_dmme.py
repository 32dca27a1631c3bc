#!/usr/bin/env python3
"""
run_dmme.py - Run driven master equation experiments from the command line.

Writes CSV tables and a JSON summary per command into the output directory
(default: results/, or output_dir from the config file).

Usage:
    python run_dmme.py figure1 [--config PATH] [--out DIR] [--grid N]
    python run_dmme.py figure2 [--config PATH] [--out DIR] [--grid N]
    python run_dmme.py simulate --config PATH
    python run_dmme.py steady [--grid N]
    python run_dmme.py scan-g2m [--low 0.1] [--high 1.0] [--resolution 1e-3]
    python run_dmme.py selfcheck

Environment:
    DMME_<KEY> overrides any config key, e.g. DMME_TEMPERATURE=1.0
"""

import sys

from dmme.cli import main


if __name__ == "__main__":
    sys.exit(main())
