#!/usr/bin/env python3
"""Run the physical demo cases (two-layer elastic/poro, layered basin).

Desk-scale by default; pass --full-scale for the documented full setups
(very large meshes, not meant for a laptop).
"""

import argparse
from pathlib import Path

from polywave.cli import _apply_desk_scale, load_config, run_case

ROOT = Path(__file__).resolve().parent.parent
DEMOS = ["demo_elastic_layers.json", "demo_poro_layers.json",
         "demo_coupled_basin.json"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full-scale", action="store_true")
    ap.add_argument("--only", default=None, help="substring filter on demo names")
    args = ap.parse_args()
    for name in DEMOS:
        if args.only and args.only not in name:
            continue
        cfg = load_config(ROOT / "configs" / name)
        if not args.full_scale:
            cfg = _apply_desk_scale(cfg)
        print(f"== {name}")
        res = run_case(cfg)
        peak = max(r["energy"] for r in res["monitor"].records)
        print(f"   finished t={res['state'].t:.3g}s wall={res['wall_s']:.1f}s "
              f"peak_energy={peak:.4e}")


if __name__ == "__main__":
    main()
