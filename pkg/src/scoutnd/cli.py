"""Command-line front end: ``scoutnd {optimize,bench,profile,variance}``."""
from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import math
import os
import re
import sys
from dataclasses import replace

import numpy as np

from .benchmarks import SimulatorError, SphereCase, make_sphere
from .config import Config, ConfigError, dump_config, parse_config
from .gradest import sf_baseline, sf_plain, variance_report
from .harness import (
    ProblemInfo,
    benchmark_suite,
    data_profile,
    error_curve,
    ingest_external_trace,
    profile_from_traces,
    write_profile_csv,
)
from .objective import EvaluationError
from .optimizer import Optimizer, initial_policy
from .plots import box_plot_svg, line_plot_svg
from .policy import GaussianPolicy
from .sampling import Scheme, draw_batch
from .trace import TraceFormatError, write_trace_csv

log = logging.getLogger("scoutnd")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_EVAL, EXIT_IO = 0, 1, 2, 3, 4
RESOLVED_NAME = "resolved.ini"


def _prepare_out(cfg: Config, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, RESOLVED_NAME), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))


def alpha_grid(cfg: Config) -> np.ndarray:
    p = cfg.profile
    return np.geomspace(p.alpha_min, p.alpha_max, p.alpha_points)


# -- optimize ---------------------------------------------------------------


def cmd_optimize(cfg: Config, out: str) -> int:
    os.makedirs(out, exist_ok=True)
    rows = []
    for d in cfg.problem.dims:
        sphere = cfg.sphere(d)
        problem = make_sphere(sphere)
        problem.workers = cfg.run.workers
        rc = cfg.run_config(problem.n_constraints)
        policy0 = initial_policy(np.full(d, cfg.problem.mu0), cfg.problem.sigma0)
        res = Optimizer(problem, policy0, rc).run()
        f, c = problem.reference(res.final_mu)
        name = f"{problem.name}-seed{rc.seed}"
        write_trace_csv(res.trace, os.path.join(out, f"{name}__optimize.csv"))
        summary = {
            "problem": name,
            "final_mu": res.final_mu.tolist(),
            "final_sigma": res.final_sigma.tolist(),
            "f": f,
            "f_minus_f_star": f - problem.known_optimum,
            "constraints": c.tolist(),
            "max_constraint": float(c.max()) if c.size else None,
            "reason": res.reason.value,
            "converged": res.converged,
            "rounds": res.rounds,
            "evals_by_level": res.evals_by_level,
            "hf_cost": res.hf_cost,
        }
        rows.append(summary)
        print(f"{name}: reason={res.reason.value} rounds={res.rounds} evals={res.evals_by_level} hf_cost={res.hf_cost:g}")
        print(f"  mu    = {np.array2string(res.final_mu, precision=5)}")
        print(f"  sigma = {np.array2string(res.final_sigma, precision=5)}")
        print(f"  f(mu) = {f:.6f}  f(mu) - f* = {f - problem.known_optimum:.6f}")
        if c.size:
            print(f"  max C(mu) = {c.max():.6f} ({'feasible' if c.max() <= 1e-6 else 'infeasible'})")
    with open(os.path.join(out, "optimize.json"), "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
    return EXIT_OK


# -- bench ------------------------------------------------------------------


def cmd_bench(cfg: Config, out: str) -> int:
    os.makedirs(out, exist_ok=True)
    n_con = 0 if SphereCase(cfg.bench.cases[0]) is SphereCase.NONE else 1
    methods = cfg.bench_methods(n_con)
    p = cfg.problem
    suite = benchmark_suite(
        methods=methods,
        seeds=cfg.bench.seeds,
        dims=p.dims,
        cases=cfg.bench.cases,
        eps_f=cfg.bench.eps_f,
        mu0=p.mu0,
        sphere=dict(noise=p.noise, noise_param=p.noise_param, lf_scale=p.lf_scale,
                    lf_cost=p.lf_cost, lf_scale_constraints=p.lf_scale_constraints),
        out_dir=os.path.join(out, "traces"),
        workers=cfg.run.workers,
    )
    _write_problems(suite.problems, os.path.join(out, "traces", "problems.csv"))
    alphas = alpha_grid(cfg)
    for counting, inp in suite.profiles.items():
        prof = data_profile(inp, alphas)
        write_profile_csv(prof, alphas, os.path.join(out, f"profile_{counting}.csv"))
        line_plot_svg({s: (alphas, v) for s, v in prof.items()}, os.path.join(out, f"profile_{counting}.svg"),
                      title=f"Data profile (eps_f={cfg.bench.eps_f}, {counting})", xlabel="alpha",
                      ylabel="d_s(alpha)", logx=True, step=True)
    _error_plot(suite, out)
    for pid, solver, err in suite.failures:
        print(f"run failed: {pid} / {solver}: {err}", file=sys.stderr)
    print(f"{len(suite.problems)} problems x {len(suite.solvers)} solvers; traces in {os.path.join(out, 'traces')}")
    return EXIT_FAIL if suite.failures else EXIT_OK


def _write_problems(problems, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "d", "f_star", "eps_f"])
        for p in problems:
            w.writerow([p.id, p.d, repr(p.f_star), repr(p.eps_f)])


def _error_plot(suite, out) -> None:
    # evolution of |f(mu) - f*| for the first case-1 problem at the largest d
    ids = [p for p in suite.problems if p.id.startswith("sphere-case1-")] or suite.problems
    target = max(ids, key=lambda p: (p.d, -ids.index(p)))
    curves = {}
    for s in suite.solvers:
        tr = suite.traces.get((target.id, s))
        if tr is not None and len(tr):
            curves[s] = error_curve(tr, target.f_star)
    if curves:
        line_plot_svg(curves, os.path.join(out, "error_curve.svg"), title=f"|f(mu) - f*| on {target.id}",
                      xlabel="HF-equivalent evaluations", ylabel="|f - f*|", logy=True)


# -- profile ----------------------------------------------------------------

_SPHERE_ID = re.compile(r"^sphere-case(\d+)-d(\d+)-seed(\d+)$")


def _read_problems(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {r["id"]: ProblemInfo(r["id"], int(r["d"]), float(r["f_star"]), float(r["eps_f"])) for r in rows}


def collect_traces(sources) -> tuple:
    """Gather ``<problem_id>__<solver>.csv`` files from directories or globs."""
    files = []
    for src in sources:
        if os.path.isdir(src):
            files += sorted(glob.glob(os.path.join(src, "*__*.csv")))
        else:
            files += sorted(glob.glob(src))
    traces, known = {}, {}
    for f in files:
        meta = os.path.join(os.path.dirname(f), "problems.csv")
        if os.path.exists(meta):
            known.update(_read_problems(meta))
        pid, _, solver = os.path.basename(f)[:-4].partition("__")
        traces[(pid, solver)] = ingest_external_trace(f)
    return traces, known


def cmd_profile(cfg: Config, out: str, extra_sources=()) -> int:
    os.makedirs(out, exist_ok=True)
    sources = list(cfg.profile.traces) + list(extra_sources)
    if not sources:
        raise ConfigError("profile needs at least one trace source ([profile] traces or --traces)")
    traces, known = collect_traces(sources)
    if not traces:
        raise ConfigError(f"no trace files found in {sources}")
    pids = sorted({pid for pid, _ in traces})
    solvers = sorted({s for _, s in traces})
    problems = []
    for pid in pids:
        if pid in known:
            problems.append(replace(known[pid], eps_f=cfg.profile.eps_f))
            continue
        m = _SPHERE_ID.match(pid)
        if not m:
            raise ConfigError(f"no metadata for problem {pid!r}; add a problems.csv next to its traces")
        case, d = int(m.group(1)), int(m.group(2))
        problems.append(ProblemInfo(pid, d, 0.5 if case == 1 else 0.0, cfg.profile.eps_f))
    # keep bench order when problems.csv provides it
    if known:
        order = {pid: i for i, pid in enumerate(known)}
        problems.sort(key=lambda p: order.get(p.id, len(order)))
    inp = profile_from_traces(problems, traces, solvers, cfg.profile.counting)
    alphas = alpha_grid(cfg)
    prof = data_profile(inp, alphas)
    write_profile_csv(prof, alphas, os.path.join(out, f"profile_{cfg.profile.counting}.csv"))
    line_plot_svg({s: (alphas, v) for s, v in prof.items()}, os.path.join(out, f"profile_{cfg.profile.counting}.svg"),
                  title="Data profile", xlabel="alpha", ylabel="d_s(alpha)", logx=True, step=True)
    print(f"profile over {len(problems)} problems, solvers: {', '.join(solvers)}")
    return EXIT_OK


# -- variance ---------------------------------------------------------------

VARIANCE_METHODS = (("plain+pseudo", sf_plain, Scheme.PSEUDO), ("baseline+qmc", sf_baseline, Scheme.QMC))


def variance_table(dims, samples, repetitions, per_rep, seed, noise=0.1, noise_param="variance"):
    """Rows ``(method, d, repetition, max_var, mean_var, trace_var)``.

    Each repetition is the spread of ``per_rep`` independent gradient estimates
    at ``theta = (1_d, e * 1_d)`` on the unconstrained noisy sphere.
    """
    from .benchmarks import SphereConfig

    rows = []
    for d in dims:
        problem = make_sphere(SphereConfig(d=d, case=SphereCase.NONE, noise=noise, noise_param=noise_param))
        policy = GaussianPolicy(np.ones(d), np.ones(d))
        for name, fn, scheme in VARIANCE_METHODS:
            for rep in range(repetitions):
                ests = []
                for i in range(per_rep):
                    s = int(np.random.SeedSequence([seed, d, rep, i]).generate_state(1, np.uint64)[0])
                    ests.append(fn(policy, problem, problem.n_levels, None, draw_batch(d, 1, samples, s, scheme)))
                vr = variance_report(ests)
                rows.append((name, d, rep, vr.max, vr.mean, vr.trace))
    return rows


def cmd_variance(cfg: Config, out: str) -> int:
    os.makedirs(out, exist_ok=True)
    v = cfg.variance
    rows = variance_table(v.dims, v.samples, v.repetitions, v.estimates_per_repetition, cfg.run.seed,
                          cfg.problem.noise, cfg.problem.noise_param)
    with open(os.path.join(out, "variance.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "d", "repetition", "max_var", "mean_var", "trace_var"])
        for r in rows:
            w.writerow([r[0], r[1], r[2], repr(r[3]), repr(r[4]), repr(r[5])])
    groups: dict = {}
    for name, d, _, mx, _, _ in rows:
        groups.setdefault(d, {}).setdefault(name, []).append(mx)
    with open(os.path.join(out, "variance_ratio.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "median_plain", "median_reduced", "ratio"])
        for d, g in groups.items():
            a, b = float(np.median(g["plain+pseudo"])), float(np.median(g["baseline+qmc"]))
            w.writerow([d, repr(a), repr(b), repr(a / b)])
            print(f"d={d}: median max-component variance {a:.4g} -> {b:.4g} (ratio {a / b:.2f})")
    box_plot_svg(groups, os.path.join(out, "variance.svg"), title=f"Gradient variance, S={v.samples}",
                 xlabel="d", ylabel="max-component variance")
    return EXIT_OK


# -- entry point ------------------------------------------------------------

COMMANDS = {"optimize": cmd_optimize, "bench": cmd_bench, "profile": cmd_profile, "variance": cmd_variance}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scoutnd", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", default=None, help="output directory (default: out/<command>)")
    ap.add_argument("--seed", type=int, default=None, help="override [run] seed")
    ap.add_argument("--workers", type=int, default=None, help="override [run] workers")
    ap.add_argument("--traces", action="append", default=[], help="extra trace directory/glob (profile)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.run.seed = args.seed
        if args.workers is not None:
            cfg.run.workers = args.workers
        cfg.run.verbosity = max(cfg.run.verbosity, args.verbose)
        level = {0: logging.WARNING, 1: logging.INFO}.get(cfg.run.verbosity, logging.DEBUG)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        out = args.out or os.path.join("out", args.command)
        _prepare_out(cfg, out)
        if args.command == "profile":
            return cmd_profile(cfg, out, args.traces)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, TraceFormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (EvaluationError, SimulatorError) as err:
        print(f"evaluation failed: {err}", file=sys.stderr)
        return EXIT_EVAL
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
