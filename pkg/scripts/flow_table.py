"""Containment table from a flows run: overlap of each curve's incoming flow with D's.

    python scripts/flow_table.py results/flows_control
"""
import csv
import sys
from pathlib import Path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/flows_control")
with open(out / "overlaps.csv", newline="") as fh:
    rows = [r for r in csv.DictReader(fh) if r["b"] == "D"]

width = max(len(r["a"]) for r in rows)
for r in rows:
    print(f"{r['scenario']:<12} {r['a']:<{width}}  in D: {float(r['overlap_fraction']):.3f}")
