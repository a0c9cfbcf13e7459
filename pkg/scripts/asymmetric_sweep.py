#!/usr/bin/env python3
"""Sweep the user position with a ten-to-one element split between surfaces.

Writes metrics.csv, powers.csv, and a replayable run_manifest.yaml.
Extra arguments are forwarded to the sweep command.
"""

import sys
from pathlib import Path

from rispilot.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "two_ris_asymmetric.yaml"

if __name__ == "__main__":
    argv = ["sweep", "--config", str(CONFIG), "--out", "results/asymmetric"]
    sys.exit(main(argv + sys.argv[1:]))
