"""Benchmark problems and the external-simulator adapter.

Sphere benchmark::

    min_x E_b[ sum_i x_i**2 + b ],   b ~ N(0, noise)

with either the boundary constraint ``1 - (x_1 + x_2) <= 0`` (optimum
``(0.5, 0.5, 0, ...)``, f* = 0.5) or the interior constraint
``sum_i x_i - 1 <= 0`` (optimum at the origin, f* = 0). The low-fidelity level
evaluates the same problem at ``x / lf_scale``.

External simulators speak a line protocol over stdin/stdout::

    request:  EVAL <level> <d> <x_1> ... <x_d> <noise_dim> <b_1> ...
    response: OK <f> <I> <C_1> ... <C_I>
          or  ERR <message>

Floats are written with ``repr`` (shortest round-trip decimal).
"""
from __future__ import annotations

import enum
import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .objective import EvaluationError, Level, ProblemSpec
from .policy import U_EPS, norm_ppf


class SphereCase(enum.IntEnum):
    NONE = 0  # unconstrained; used by the gradient oracles
    BOUNDARY = 1
    INTERIOR = 2


@dataclass(frozen=True)
class SphereConfig:
    d: int
    case: SphereCase = SphereCase.BOUNDARY
    noise: float = 0.1
    # "variance" reads N(0, 0.1) as N(mean, variance); "std" as N(mean, std)
    noise_param: str = "variance"
    lf_scale: float = 1.05
    lf_cost: float = 0.1
    lf_scale_constraints: bool = True

    def __post_init__(self):
        object.__setattr__(self, "case", SphereCase(self.case))
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.case is SphereCase.BOUNDARY and self.d < 2:
            raise ValueError("the boundary case needs d >= 2")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.noise_param not in ("variance", "std"):
            raise ValueError("noise_param must be 'variance' or 'std'")
        if not 0 < self.lf_cost < 1:
            raise ValueError("lf_cost must lie in (0, 1)")

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.noise) if self.noise_param == "variance" else self.noise

    @property
    def f_star(self) -> float:
        return 0.5 if self.case is SphereCase.BOUNDARY else 0.0

    @property
    def x_star(self) -> np.ndarray:
        x = np.zeros(self.d)
        if self.case is SphereCase.BOUNDARY:
            x[:2] = 0.5
        return x


def sphere_value(x: Sequence[float], b: float = 0.0) -> float:
    """Sum of squares plus noise, correctly rounded via ``math.fsum``."""
    return math.fsum([v * v for v in x]) + b


def sphere_constraints(x: Sequence[float], case: SphereCase) -> list:
    if case is SphereCase.BOUNDARY:
        return [1.0 - (x[0] + x[1])]
    if case is SphereCase.INTERIOR:
        return [math.fsum(x) - 1.0]
    return []


def _constraints_batch(X: np.ndarray, case: SphereCase) -> np.ndarray:
    if case is SphereCase.BOUNDARY:
        return (1.0 - (X[:, 0] + X[:, 1]))[:, None]
    if case is SphereCase.INTERIOR:
        return (X.sum(axis=1) - 1.0)[:, None]
    return np.zeros((X.shape[0], 0))


def make_sphere(cfg: SphereConfig) -> ProblemSpec:
    """Two-level (LF, HF) noisy sphere problem."""
    case = cfg.case
    std = cfg.noise_std

    def level_fns(scale_obj: float, scale_con: float):
        def fn(x, b):
            x = [float(v) for v in x]
            bb = float(b[0]) if len(b) else 0.0
            xo = [v / scale_obj for v in x] if scale_obj != 1.0 else x
            xc = [v / scale_con for v in x] if scale_con != 1.0 else x
            return sphere_value(xo, bb), np.array(sphere_constraints(xc, case))

        def batch(X, B):
            Xo = X / scale_obj if scale_obj != 1.0 else X
            Xc = X / scale_con if scale_con != 1.0 else X
            F = np.einsum("ij,ij->i", Xo, Xo) + B[:, 0]
            return F, _constraints_batch(Xc, case)

        return fn, batch

    lf_con = cfg.lf_scale if cfg.lf_scale_constraints else 1.0
    lf = Level(*level_fns(cfg.lf_scale, lf_con), name="LF")
    hf = Level(*level_fns(1.0, 1.0), name="HF")

    def noise_sampler(u):
        u = np.clip(np.asarray(u, dtype=float), U_EPS, 1.0 - U_EPS)
        return std * norm_ppf(u)

    def reference(x):
        x = [float(v) for v in x]
        return sphere_value(x), np.array(sphere_constraints(x, case))

    return ProblemSpec(
        dim=cfg.d,
        levels=[lf, hf],
        n_constraints=0 if case is SphereCase.NONE else 1,
        noise_dim=1,
        noise_sampler=noise_sampler,
        costs=[cfg.lf_cost, 1.0],
        known_optimum=cfg.f_star,
        reference=reference,
        name=f"sphere-case{int(case)}-d{cfg.d}",
    )


# -- external simulators ----------------------------------------------------


class SimulatorError(EvaluationError):
    pass


class SimulatorTimeout(SimulatorError):
    pass


class MalformedResponse(SimulatorError):
    pass


class SimulatorExited(SimulatorError):
    pass


@dataclass(frozen=True)
class ExternalSimSpec:
    command: tuple
    level_args: tuple = ()
    protocol_version: int = 1
    timeout: float = 30.0
    retries: int = 1

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(str(c) for c in self.command))
        object.__setattr__(self, "level_args", tuple(tuple(str(a) for a in la) for la in self.level_args))
        if not self.command:
            raise ValueError("command must not be empty")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def format_request(level: int, x, b) -> str:
    parts = ["EVAL", str(int(level)), str(len(x))]
    parts += [repr(float(v)) for v in x]
    parts.append(str(len(b)))
    parts += [repr(float(v)) for v in b]
    return " ".join(parts)


def parse_response(line: str) -> tuple[float, np.ndarray]:
    tok = line.split()
    if not tok:
        raise MalformedResponse("empty response")
    if tok[0] == "ERR":
        raise SimulatorError("simulator reported: " + " ".join(tok[1:]))
    if tok[0] != "OK" or len(tok) < 3:
        raise MalformedResponse(f"bad response record {line.strip()!r}")
    try:
        f = float(tok[1])
        n = int(tok[2])
        c = [float(t) for t in tok[3:]]
    except ValueError as err:
        raise MalformedResponse(f"bad number in {line.strip()!r}") from err
    if len(c) != n:
        raise MalformedResponse(f"response announces {n} constraints, carries {len(c)}")
    if not math.isfinite(f) or not all(math.isfinite(v) for v in c):
        raise MalformedResponse(f"non-finite value in {line.strip()!r}")
    return f, np.array(c, dtype=float)


class _Child:
    def __init__(self, argv):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            text=True, bufsize=1,
        )
        self.lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self.lines.put(line)
        self.lines.put(None)

    def request(self, line: str, timeout: float) -> str:
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise SimulatorExited(f"simulator pipe closed (exit code {self.proc.poll()})") from err
        try:
            out = self.lines.get(timeout=timeout)
        except queue.Empty:
            raise SimulatorTimeout(f"no response within {timeout}s") from None
        if out is None:
            code = self.proc.wait()
            raise SimulatorExited(f"simulator exited with code {code}")
        return out

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=2)
            except Exception:
                self.proc.kill()
                self.proc.wait()


class ExternalSimulator:
    """One persistent child process per level command (not reentrant)."""

    def __init__(self, spec: ExternalSimSpec):
        self.spec = spec
        self._children: dict = {}
        self.n_requests = 0
        self.n_responses = 0

    def _argv(self, level: int):
        if self.spec.level_args:
            return list(self.spec.command) + list(self.spec.level_args[level - 1])
        return list(self.spec.command)

    def _child(self, level: int) -> _Child:
        key = level if self.spec.level_args else 0
        ch = self._children.get(key)
        if ch is None or ch.proc.poll() is not None:
            ch = _Child(self._argv(level))
            self._children[key] = ch
        return ch

    def _drop(self, level: int):
        key = level if self.spec.level_args else 0
        ch = self._children.pop(key, None)
        if ch is not None:
            ch.proc.kill()
            ch.close()

    def evaluate(self, level: int, x, b) -> tuple[float, np.ndarray]:
        line = format_request(level, x, b)
        last = None
        for _ in range(self.spec.retries + 1):
            ch = self._child(level)
            self.n_requests += 1
            try:
                out = ch.request(line, self.spec.timeout)
            except (SimulatorTimeout, SimulatorExited) as err:
                last = err
                self._drop(level)
                continue
            self.n_responses += 1
            try:
                return parse_response(out)
            except SimulatorError as err:
                err.level, err.x = level, np.asarray(x, dtype=float)
                raise
        last.level, last.x = level, np.asarray(x, dtype=float)
        raise last

    def close(self):
        for key in list(self._children):
            self._children.pop(key).close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_evaluate(sim: ExternalSimulator, level: int, x, b) -> tuple[float, np.ndarray]:
    return sim.evaluate(level, x, b)


def external_problem(
    spec: ExternalSimSpec,
    dim: int,
    n_levels: int = 1,
    n_constraints: int = 0,
    noise_dim: int = 0,
    noise_sampler=None,
    costs: Optional[list] = None,
    workers: int = 1,
) -> ProblemSpec:
    """ProblemSpec backed by external processes; one simulator per worker thread."""
    local = threading.local()
    sims: list = []
    lock = threading.Lock()

    def sim() -> ExternalSimulator:
        s = getattr(local, "sim", None)
        if s is None:
            s = local.sim = ExternalSimulator(spec)
            with lock:
                sims.append(s)
        return s

    def make_level(level):
        return Level(lambda x, b: sim().evaluate(level, x, b), name=f"ext{level}")

    problem = ProblemSpec(
        dim=dim,
        levels=[make_level(lv) for lv in range(1, n_levels + 1)],
        n_constraints=n_constraints,
        noise_dim=noise_dim,
        noise_sampler=noise_sampler,
        costs=costs,
        name="external",
        workers=workers,
    )
    problem.close = lambda: [s.close() for s in sims]
    return problem
