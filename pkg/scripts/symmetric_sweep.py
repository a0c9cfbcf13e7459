#!/usr/bin/env python3
"""Sweep the user position across the symmetric two-surface layout.

Writes metrics.csv, powers.csv, and a replayable run_manifest.yaml.
Extra arguments are forwarded to the sweep command, and a repeated flag
overrides the default here (for example --trials 2000 --out /tmp/sym).
"""

import sys
from pathlib import Path

from rispilot.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "two_ris_symmetric.yaml"

if __name__ == "__main__":
    argv = ["sweep", "--config", str(CONFIG), "--out", "results/symmetric"]
    sys.exit(main(argv + sys.argv[1:]))
