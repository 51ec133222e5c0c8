#!/usr/bin/env python3
"""Run a fixed-mesh p-refinement sweep (degrees 1..5) for one problem kind.

Usage: python scripts/run_p_sweep.py [elastic|poro|coupled] [--out DIR]
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
    suite = json.loads((ROOT / "configs" / f"suite_{args.kind}_p.json").read_text())
    out = args.out or f"out/{args.kind}_p"
    reports, _ = run_convergence_suite(suite, out_dir=out)
    for r in reports:
        l2 = ", ".join(f"L2_{k}={v:.4e}" for k, v in r.err_l2.items())
        print(f"p={r.p} dofs={r.dofs} {l2}")
    print(f"table written to {out}/errors.csv")


if __name__ == "__main__":
    main()
