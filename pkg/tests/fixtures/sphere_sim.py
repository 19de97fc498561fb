#!/usr/bin/env python3
"""Reference simulator speaking the EVAL/OK line protocol.

Evaluates the noisy sphere: f = fsum(x_i**2) + b_1 at level 2 (HF) and
f = fsum((x_i / 1.05)**2) + b_1 at level 1 (LF). Constraint per --case.

Failure modes for adapter tests: --mode nan | sleep | exit | err | echo.
``echo`` returns f = sum(x) with no constraints.
"""
import argparse
import math
import sys
import time


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--case", type=int, default=1)
    ap.add_argument("--mode", default="ok")
    ap.add_argument("--fail-after", type=int, default=-1)
    args = ap.parse_args()
    served = 0
    for line in sys.stdin:
        tok = line.split()
        if not tok:
            continue
        if tok[0] != "EVAL":
            print("ERR unknown record " + tok[0], flush=True)
            continue
        level, d = int(tok[1]), int(tok[2])
        x = [float(t) for t in tok[3:3 + d]]
        nb = int(tok[3 + d])
        b = [float(t) for t in tok[4 + d:4 + d + nb]]
        served += 1
        if args.fail_after >= 0 and served > args.fail_after:
            sys.exit(3)
        if args.mode == "nan":
            print("OK nan 0", flush=True)
            continue
        if args.mode == "sleep":
            time.sleep(60)
        if args.mode == "exit":
            sys.exit(2)
        if args.mode == "err":
            print("ERR solver diverged", flush=True)
            continue
        if args.mode == "echo":
            print("OK " + repr(math.fsum(x)) + " 0", flush=True)
            continue
        scale = 1.05 if level == 1 else 1.0
        xs = [v / scale for v in x] if scale != 1.0 else x
        f = math.fsum([v * v for v in xs]) + (b[0] if b else 0.0)
        if args.case == 1:
            c = [1.0 - (xs[0] + xs[1])]
        elif args.case == 2:
            c = [math.fsum(xs) - 1.0]
        else:
            c = []
        print("OK " + " ".join([repr(f), str(len(c))] + [repr(v) for v in c]), flush=True)


if __name__ == "__main__":
    main()
