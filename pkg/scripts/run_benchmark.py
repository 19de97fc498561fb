"""Sphere benchmark grid and data profiles for Scout-Nd and MF-Scout-Nd.

The full grid (50 problems, two methods) takes a while on one core; ``--quick``
runs d = 2, 4 with two seeds.

    python scripts/run_benchmark.py --out out/bench [--quick] [--workers 4]
"""
import argparse
import os
import sys
import tempfile

from scoutnd.cli import main
from scoutnd.config import dump_config, parse_config

HERE = os.path.dirname(os.path.abspath(__file__))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=os.path.join(HERE, "..", "configs", "bench.ini"))
    ap.add_argument("--out", default="out/bench")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()

    config = args.config
    if args.quick:
        cfg = parse_config(args.config)
        cfg.problem.dims = (2, 4)
        cfg.bench.seeds = (0, 1)
        fd, config = tempfile.mkstemp(suffix=".ini")
        with os.fdopen(fd, "w") as fh:
            fh.write(dump_config(cfg))
    argv = ["bench", "--config", config, "--out", args.out]
    if args.workers:
        argv += ["--workers", str(args.workers)]
    sys.exit(main(argv))
