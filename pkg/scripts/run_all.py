"""Run every experiment config under configs/ through the CLI.

    python scripts/run_all.py [--threads N] [--only fisher_sweep flows_control]
"""
import argparse
import sys
from pathlib import Path

from nmmetrology.cli import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", default=None)
    ap.add_argument("--results", default=str(ROOT / "results"))
    args = ap.parse_args()

    failed = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        tag = cfg.stem
        if args.only and tag not in args.only:
            continue
        print(f"== {cfg.name}", flush=True)
        code = run_experiment(cfg, Path(args.results) / tag, threads=args.threads)
        failed += code != 0
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
