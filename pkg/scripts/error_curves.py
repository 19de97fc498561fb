"""Distance to the optimal objective versus HF-equivalent evaluations.

Runs Scout-Nd and MF-Scout-Nd on the boundary-constrained sphere and plots
|f(mu) - f*| against cost, one curve per method (median over seeds).

    python scripts/error_curves.py --d 8 --seeds 5 --out out/error
"""
import argparse
import csv
import os

import numpy as np

from scoutnd.benchmarks import SphereCase, SphereConfig, make_sphere
from scoutnd.harness import error_curve, evals_to_accuracy
from scoutnd.optimizer import RunConfig, initial_policy, run
from scoutnd.plots import line_plot_svg

METHODS = {
    "scout-nd": dict(estimator="BASELINE_QMC", samples_per_level=(50,)),
    "mf-scout-nd": dict(estimator="MULTIFIDELITY", samples_per_level=(50, 10)),
}


def median_curve(curves, grid):
    # step-interpolate each run onto a shared cost grid before taking the median
    rows = []
    for x, e in curves:
        idx = np.searchsorted(x, grid, side="right") - 1
        rows.append(np.where(idx >= 0, e[np.clip(idx, 0, None)], np.nan))
    return np.nanmedian(np.array(rows), axis=0)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--case", type=int, default=1)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--budget", type=float, default=50_000)
    ap.add_argument("--out", default="out/error")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    grid = np.geomspace(50, args.budget, 200)
    plotted, summary = {}, []
    for name, kw in METHODS.items():
        curves = []
        for seed in range(args.seeds):
            problem = make_sphere(SphereConfig(d=args.d, case=SphereCase(args.case)))
            res = run(problem, initial_policy(np.ones(args.d)), RunConfig(seed=seed, max_total_evals=args.budget, **kw))
            curves.append(error_curve(res.trace, problem.known_optimum))
            t = evals_to_accuracy(res.trace, problem.known_optimum, 0.1, "hf_cost")
            summary.append((name, seed, t, res.hf_cost))
            print(f"{name} seed={seed}: cost to eps_f=0.1 {t:g}, final |f-f*| {curves[-1][1][-1]:.4f}")
        plotted[name] = (grid, median_curve(curves, grid))

    line_plot_svg(plotted, os.path.join(args.out, "error_curve.svg"), title=f"case {args.case}, d={args.d}",
                  xlabel="HF-equivalent evaluations", ylabel="|f(mu) - f*|", logx=True, logy=True)
    with open(os.path.join(args.out, "cost_to_accuracy.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "seed", "hf_cost_to_eps", "hf_cost_total"])
        w.writerows(summary)
