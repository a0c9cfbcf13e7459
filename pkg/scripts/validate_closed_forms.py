#!/usr/bin/env python3
"""Run the closed-form versus Monte Carlo check suite on the symmetric layout.

Prints one line per check and exits nonzero if any check fails outright.
Extra arguments are forwarded (for example --trials 20000 for a quick look).
"""

import sys
from pathlib import Path

from rispilot.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "two_ris_symmetric.yaml"

if __name__ == "__main__":
    argv = ["validate", "--config", str(CONFIG), "--out", "results/validation"]
    sys.exit(main(argv + sys.argv[1:]))
