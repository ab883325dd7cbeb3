"""Run the bundled presets through the CLI, one output directory each.

    python3 scripts/run_presets.py --out results --workers 4 lambda-bounds zeeman-grid
"""
import argparse
import sys

from photonlimits.cli import PRESETS, main

VERB = {"lambda-bounds": "optimize", "regime-shapes": "sweep", "three-level": "sweep", "zeeman-grid": "zeeman-map", "drive-margins": "drive-check"}


def run(names, out, workers, seed):
    codes = {}
    for name in names:
        argv = [VERB[name], "--preset", name, "--out", f"{out}/{name}", "--workers", str(workers)]
        if seed is not None:
            argv += ["--seed", str(seed)]
        codes[name] = main(argv)
    return codes


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("presets", nargs="*", default=sorted(PRESETS))
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    codes = run(args.presets, args.out, args.workers, args.seed)
    for name, code in codes.items():
        print(f"{name}: exit {code}")
    sys.exit(max(codes.values()))
