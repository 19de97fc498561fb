"""Benchmark orchestration and solver-comparison metrics.

Data profiles follow More and Wild: for a solver s, ``d_s(alpha)`` is the
fraction of problems solved (to within ``eps_f`` of the known optimum) using
at most ``alpha * (d_p + 1)`` evaluations.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .benchmarks import SphereCase, SphereConfig, make_sphere
from .gradest import Estimator
from .optimizer import Optimizer, RunConfig, initial_policy
from .trace import EvalTrace, read_trace_csv, write_trace_csv

log = logging.getLogger(__name__)

COUNTINGS = ("evals", "hf_cost")


def evals_to_accuracy(trace: EvalTrace, f_star: float, eps_f: float, count: str = "evals") -> float:
    """First budget at which the best feasible value is within ``eps_f`` of ``f_star``.

    ``count="evals"`` returns the record's ``eval_index``; ``count="hf_cost"``
    its HF-equivalent cost. Returns ``inf`` when the accuracy is never reached.
    """
    if eps_f <= 0:
        raise ValueError("eps_f must be > 0")
    if count not in COUNTINGS:
        raise ValueError(f"count must be one of {COUNTINGS}")
    for r in trace.records:
        if r.best_feasible_so_far - f_star <= eps_f:
            return float(r.eval_index) if count == "evals" else float(r.hf_cost)
    return math.inf


def error_curve(trace: EvalTrace, f_star: float, count: str = "hf_cost"):
    """``(budget, f - f*)`` pairs at every record; ``f`` is the value at the candidate."""
    x = trace.column("eval_index" if count == "evals" else "hf_cost")
    return x, np.abs(trace.column("f") - f_star)


@dataclass(frozen=True)
class ProblemInfo:
    id: str
    d: int
    f_star: float
    eps_f: float = 0.1


@dataclass
class ProfileInput:
    problems: list
    solvers: list
    t: np.ndarray  # (n_problems, n_solvers); inf when never solved

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(len(self.problems), len(self.solvers))
        if np.any(np.isnan(self.t)) or np.any(self.t <= 0):
            raise ValueError("t entries must be positive or inf")


def data_profile(inp: ProfileInput, alphas) -> dict:
    """``{solver: d_s(alpha) over the alpha grid}``."""
    if not inp.problems:
        raise ValueError("data profile needs at least one problem")
    alphas = np.asarray(alphas, dtype=float)
    dp1 = np.array([p.d + 1 for p in inp.problems], dtype=float)
    out = {}
    for j, s in enumerate(inp.solvers):
        ratio = np.sort(inp.t[:, j] / dp1)
        solved = np.searchsorted(ratio, alphas, side="right")
        out[s] = solved / len(inp.problems)
    return out


def write_profile_csv(profile: Mapping, alphas, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "solver", "ds"])
        for s, ds in profile.items():
            for a, v in zip(alphas, ds):
                w.writerow([repr(float(a)), s, repr(float(v))])


def read_profile_csv(path) -> dict:
    out: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["alpha", "solver", "ds"]:
        raise ValueError(f"{path}: not a profile file")
    for a, s, v in rows[1:]:
        out.setdefault(s, ([], []))
        out[s][0].append(float(a))
        out[s][1].append(float(v))
    return {s: (np.array(a), np.array(v)) for s, (a, v) in out.items()}


def ingest_external_trace(path) -> EvalTrace:
    """Load a trace written by another solver (e.g. COBYLA) in the trace CSV schema."""
    return read_trace_csv(path)


def profile_from_traces(problems: Sequence[ProblemInfo], traces: Mapping, solvers: Sequence[str],
                        count: str = "evals") -> ProfileInput:
    """Build the t-matrix from ``traces[(problem_id, solver)]``; missing runs count as unsolved."""
    t = np.full((len(problems), len(solvers)), math.inf)
    for i, p in enumerate(problems):
        for j, s in enumerate(solvers):
            tr = traces.get((p.id, s))
            if tr is not None and len(tr):
                t[i, j] = evals_to_accuracy(tr, p.f_star, p.eps_f, count)
    return ProfileInput(list(problems), list(solvers), t)


def default_methods() -> dict:
    return {
        "scout-nd": RunConfig(estimator=Estimator.BASELINE_QMC, samples_per_level=(50,)),
        "mf-scout-nd": RunConfig(estimator=Estimator.MULTIFIDELITY, samples_per_level=(50, 10)),
    }


def problem_id(case: int, d: int, seed: int) -> str:
    return f"sphere-case{int(case)}-d{d}-seed{seed}"


def trace_filename(pid: str, solver: str) -> str:
    return f"{pid}__{solver}.csv"


@dataclass
class SuiteResult:
    problems: list
    solvers: list
    traces: dict
    profiles: dict  # counting -> ProfileInput
    failures: list = field(default_factory=list)
    final: dict = field(default_factory=dict)  # (pid, solver) -> (final_mu, final_sigma, reason)


def _one_run(job):
    pid, solver, sphere_cfg, cfg, mu0 = job
    problem = make_sphere(sphere_cfg)
    res = Optimizer(problem, initial_policy(np.full(sphere_cfg.d, mu0)), cfg).run()
    return pid, solver, res.trace, (res.final_mu, res.final_sigma, res.reason.value)


def benchmark_suite(
    methods: Optional[Mapping[str, RunConfig]] = None,
    seeds: Iterable[int] = range(5),
    dims: Iterable[int] = (2, 4, 8, 16, 32),
    cases: Iterable[int] = (1, 2),
    eps_f: float = 0.1,
    mu0: float = 1.0,
    sphere: Optional[dict] = None,
    out_dir=None,
    workers: int = 1,
) -> SuiteResult:
    """Run every method on every (case, d, seed) sphere problem.

    Each seed is its own problem, so the default grid gives 5 x 5 x 2 = 50
    problems. Failed runs are logged and counted as unsolved.
    """
    methods = dict(methods or default_methods())
    sphere = dict(sphere or {})
    problems, jobs = [], []
    for case in cases:
        for d in dims:
            for seed in seeds:
                scfg = SphereConfig(d=d, case=SphereCase(case), **sphere)
                pid = problem_id(case, d, seed)
                problems.append(ProblemInfo(pid, d, scfg.f_star, eps_f))
                for name, cfg in methods.items():
                    jobs.append((pid, name, scfg, replace(cfg, seed=int(seed)), mu0))

    traces, final, failures = {}, {}, []

    def collect(job, outcome):
        if isinstance(outcome, BaseException):
            log.warning("run %s / %s failed: %s", job[0], job[1], outcome)
            failures.append((job[0], job[1], repr(outcome)))
            return
        pid, solver, trace, fin = outcome
        traces[(pid, solver)] = trace
        final[(pid, solver)] = fin

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_one_run, j) for j in jobs]
            for job, fut in zip(jobs, futures):
                try:
                    collect(job, fut.result())
                except Exception as err:  # noqa: BLE001 - a failed run must not stop the suite
                    collect(job, err)
    else:
        for job in jobs:
            try:
                collect(job, _one_run(job))
            except Exception as err:  # noqa: BLE001
                collect(job, err)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for (pid, solver), tr in traces.items():
            write_trace_csv(tr, os.path.join(out_dir, trace_filename(pid, solver)))

    solvers = list(methods)
    profiles = {c: profile_from_traces(problems, traces, solvers, c) for c in COUNTINGS}
    return SuiteResult(problems, solvers, traces, profiles, failures, final)
