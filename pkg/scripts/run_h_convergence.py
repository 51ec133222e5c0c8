#!/usr/bin/env python3
"""Run one of the h-convergence suites and print the fitted rates.

Usage: python scripts/run_h_convergence.py [elastic|poro|coupled] [--out DIR]
"""

import argparse
import json
from pathlib import Path

from polywave.cli import run_convergence_suite

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("kind", choices=["elastic", "poro", "coupled"])
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    suite = json.loads((ROOT / "configs" / f"suite_{args.kind}_h.json").read_text())
    out = args.out or f"out/{args.kind}_h"
    reports, rates = run_convergence_suite(suite, out_dir=out)
    for r in reports:
        print(f"p={r.p} h={r.h:.4f} energy_error={r.err_energy:.6e}")
    for row in rates:
        print(f"{row[0]}: least-squares slope {row[5]} (pairwise {row[9]})")
    print(f"table written to {out}/errors.csv")


if __name__ == "__main__":
    main()
