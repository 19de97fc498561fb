"""Gradient-estimator variance versus dimension (plain + pseudo-random vs baseline + QMC).

    python scripts/variance_study.py --out out/variance
"""
import argparse
import os
import sys

from scoutnd.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=os.path.join(HERE, "..", "configs", "variance.ini"))
    ap.add_argument("--out", default="out/variance")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    argv = ["variance", "--config", args.config, "--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    sys.exit(main(argv))
