"""Evaluation traces and their CSV form.

CSV schema: header ``eval_index,level,hf_cost,f,c1,...,cI`` followed by one row
per record. ``best_feasible_so_far`` is never stored; it is recomputed on load.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

FEASIBILITY_TOL = 1e-6


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    eval_index: int
    level: int
    hf_cost: float
    f: float
    c: tuple = ()
    best_feasible_so_far: float = math.inf


def is_feasible(c, tol: float = FEASIBILITY_TOL) -> bool:
    # NaN (unknown) constraint values are never feasible
    return all(v <= tol for v in c)


@dataclass
class EvalTrace:
    records: list = field(default_factory=list)
    tol: float = FEASIBILITY_TOL

    def __len__(self):
        return len(self.records)

    def append(self, eval_index: int, level: int, hf_cost: float, f: float, c=()) -> TraceRecord:
        c = tuple(float(v) for v in c)
        if self.records:
            last = self.records[-1]
            if eval_index <= last.eval_index:
                raise ValueError(f"eval_index {eval_index} not after {last.eval_index}")
            best = last.best_feasible_so_far
        else:
            best = math.inf
        if is_feasible(c, self.tol) and f < best:
            best = float(f)
        rec = TraceRecord(int(eval_index), int(level), float(hf_cost), float(f), c, best)
        self.records.append(rec)
        return rec

    def recompute_best(self) -> "EvalTrace":
        best = math.inf
        out = []
        for r in self.records:
            if is_feasible(r.c, self.tol) and r.f < best:
                best = r.f
            out.append(replace(r, best_feasible_so_far=best))
        return EvalTrace(out, self.tol)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def n_constraints(self) -> int:
        return len(self.records[0].c) if self.records else 0


def write_trace_csv(trace: EvalTrace, path) -> None:
    n_c = trace.n_constraints
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eval_index", "level", "hf_cost", "f"] + [f"c{i + 1}" for i in range(n_c)])
        for r in trace.records:
            w.writerow([r.eval_index, r.level, repr(r.hf_cost), repr(r.f)] + [repr(v) for v in r.c])


def read_trace_csv(path, tol: float = FEASIBILITY_TOL) -> EvalTrace:
    """Validate and load a trace file; the running best is recomputed."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[:4] != ["eval_index", "level", "hf_cost", "f"]:
        raise TraceFormatError(f"{path}: header must start with eval_index,level,hf_cost,f")
    n_c = len(header) - 4
    data = [r for r in rows[1:] if r and any(x.strip() for x in r)]
    if not data:
        raise TraceFormatError(f"{path}: no records")
    trace = EvalTrace(tol=tol)
    prev = None
    for lineno, row in enumerate(data, start=2):
        if len(row) != 4 + n_c:
            raise TraceFormatError(f"{path}: row {lineno} has {len(row)} fields, expected {4 + n_c}")
        try:
            idx, level = int(row[0]), int(row[1])
            hf, f = float(row[2]), float(row[3])
            c = [float(v) for v in row[4:]]
        except ValueError as err:
            raise TraceFormatError(f"{path}: row {lineno}: {err}") from err
        if prev is not None and idx <= prev:
            raise TraceFormatError(f"{path}: row {lineno} out of order (eval_index {idx} after {prev})")
        if idx < 1 or level < 1:
            raise TraceFormatError(f"{path}: row {lineno}: eval_index and level must be >= 1")
        if math.isnan(f):
            raise TraceFormatError(f"{path}: row {lineno}: f is NaN")
        prev = idx
        trace.append(idx, level, hf, f, c)
    return trace
