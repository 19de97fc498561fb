"""Problem definition, penalty augmentation and penalty schedules."""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# (x, b) -> (f, C); C is a length-I vector.
Evaluator = Callable[[np.ndarray, np.ndarray], tuple]
# (X, B) -> (F, Cmat) on a whole batch; F has shape (S,), Cmat (S, I).
BatchEvaluator = Callable[[np.ndarray, np.ndarray], tuple]


class EvaluationError(RuntimeError):
    """A black-box evaluation failed or returned something unusable."""

    def __init__(self, message, level=None, x=None, index=None):
        super().__init__(message)
        self.message = message
        self.level = level
        self.x = None if x is None else np.asarray(x, dtype=float)
        self.index = index

    def __str__(self):
        where = []
        if self.level is not None:
            where.append(f"level={self.level}")
        if self.index is not None:
            where.append(f"sample={self.index}")
        if self.x is not None:
            where.append(f"x={np.array2string(self.x, precision=6)}")
        return f"{self.message} ({', '.join(where)})" if where else self.message


class EvalCounter:
    """Thread-safe per-level evaluation counts (levels numbered from 1)."""

    def __init__(self, n_levels: int):
        self._lock = threading.Lock()
        self._counts = [0] * n_levels

    def add(self, level: int, n: int = 1) -> None:
        with self._lock:
            self._counts[level - 1] += n

    @property
    def counts(self) -> list[int]:
        with self._lock:
            return list(self._counts)

    def set(self, counts: Sequence[int]) -> None:
        with self._lock:
            self._counts = [int(c) for c in counts]

    def reset(self) -> None:
        self.set([0] * len(self._counts))


@dataclass
class Level:
    """One fidelity level. ``batch`` is an optional vectorized twin of ``fn``."""

    fn: Evaluator
    batch: Optional[BatchEvaluator] = None
    name: str = ""


@dataclass
class ProblemSpec:
    dim: int
    levels: list
    n_constraints: int = 0
    noise_dim: int = 0
    noise_sampler: Optional[Callable[[np.ndarray], np.ndarray]] = None
    costs: Optional[list] = None
    known_optimum: Optional[float] = None
    # Noise-free objective and constraints at a design, when the benchmark knows them.
    reference: Optional[Callable[[np.ndarray], tuple]] = None
    name: str = "problem"
    workers: int = 1
    counter: EvalCounter = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.levels:
            raise ValueError("a problem needs at least one fidelity level")
        self.levels = [lv if isinstance(lv, Level) else Level(lv) for lv in self.levels]
        if self.costs is None:
            self.costs = [float(i + 1) for i in range(len(self.levels))]
        self.costs = [float(c) for c in self.costs]
        if len(self.costs) != len(self.levels):
            raise ValueError("one cost weight per level is required")
        if any(c <= 0 for c in self.costs) or any(b <= a for a, b in zip(self.costs, self.costs[1:])):
            raise ValueError("costs must be positive and strictly increasing with level")
        if self.noise_dim < 0 or self.n_constraints < 0:
            raise ValueError("noise_dim and n_constraints must be >= 0")
        self.counter = EvalCounter(len(self.levels))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def noise(self, u_noise) -> np.ndarray:
        u_noise = np.asarray(u_noise, dtype=float)
        if self.noise_dim == 0:
            return np.zeros(u_noise.shape[:-1] + (0,))
        if u_noise.shape[-1] != self.noise_dim:
            raise ValueError(f"u_noise has {u_noise.shape[-1]} columns, problem has noise_dim={self.noise_dim}")
        return np.asarray(self.noise_sampler(u_noise), dtype=float)


@dataclass(frozen=True)
class PenaltySchedule:
    lambdas: tuple

    def __post_init__(self):
        lams = tuple(np.asarray(lam, dtype=float).reshape(-1) for lam in self.lambdas)
        if not lams:
            raise ValueError("a penalty schedule needs K >= 1 entries")
        width = lams[0].size
        for a, b in zip(lams, lams[1:]):
            if b.size != width:
                raise ValueError("all penalty vectors must have the same length")
            if np.any(b < a):
                raise ValueError("penalty vectors must be componentwise nondecreasing")
        if any(np.any(lam <= 0) for lam in lams):
            raise ValueError("penalty entries must be > 0")
        object.__setattr__(self, "lambdas", lams)

    @property
    def K(self) -> int:
        return len(self.lambdas)

    def __getitem__(self, k: int) -> np.ndarray:
        # rounds beyond K keep the last (largest) penalty
        return self.lambdas[min(k, self.K - 1)]


def geometric_schedule(lambda0, ratio: float, K: int) -> PenaltySchedule:
    if ratio <= 1:
        raise ValueError(f"schedule ratio must be > 1, got {ratio}")
    if K < 1:
        raise ValueError("K must be >= 1")
    lambda0 = np.asarray(lambda0, dtype=float).reshape(-1)
    return PenaltySchedule(tuple(lambda0 * ratio**k for k in range(K)))


def default_schedule(n_constraints: int, lambda0: float = 1.0, ratio: float = 2.0, K: int = 4) -> PenaltySchedule:
    return geometric_schedule(np.full(n_constraints, lambda0), ratio, K)


def augmented_objective(f_val, c_vals, lam):
    """``f + sum_i lam_i * max(C_i, 0)``; broadcasts over a leading batch axis.

    Raises ``ValueError`` on NaN anywhere in the inputs.
    """
    f_val = np.asarray(f_val, dtype=float)
    c_vals = np.asarray(c_vals, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if c_vals.shape[-1:] != lam.shape[-1:] and not (c_vals.shape[-1:] == (0,) and lam.size == 0):
        raise ValueError(f"constraint values {c_vals.shape} do not match penalties {lam.shape}")
    if np.isnan(f_val).any() or np.isnan(c_vals).any() or np.isnan(lam).any():
        raise ValueError("NaN in augmented objective inputs")
    out = f_val + (lam * np.maximum(c_vals, 0.0)).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _checked(problem: ProblemSpec, level: int, x, f, c, index=None):
    c = np.asarray(c, dtype=float).reshape(-1)
    try:
        f = float(f)
    except (TypeError, ValueError) as err:
        raise EvaluationError(f"objective returned non-scalar {f!r}", level, x, index) from err
    if c.size != problem.n_constraints:
        raise EvaluationError(f"expected {problem.n_constraints} constraints, got {c.size}", level, x, index)
    if not np.isfinite(f) or not np.all(np.isfinite(c)):
        raise EvaluationError("non-finite value from black box", level, x, index)
    return f, c


def evaluate(problem: ProblemSpec, level: int, x, u_noise) -> tuple[float, np.ndarray]:
    """Evaluate one design at fidelity ``level`` (1-based) with noise from ``u_noise``."""
    if not 1 <= level <= problem.n_levels:
        raise ValueError(f"level {level} outside 1..{problem.n_levels}")
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError(f"x has shape {x.shape}, problem has dim={problem.dim}")
    b = problem.noise(u_noise)
    try:
        f, c = problem.levels[level - 1].fn(x, b)
    except EvaluationError:
        raise
    except Exception as err:
        raise EvaluationError(f"evaluator raised {type(err).__name__}: {err}", level, x) from err
    problem.counter.add(level)
    return _checked(problem, level, x, f, c)


def evaluate_batch(problem: ProblemSpec, level: int, X, U_noise) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``S`` designs; returns ``(F, C)`` with shapes ``(S,)`` and ``(S, I)``.

    Uses the level's vectorized evaluator when it has one, otherwise fans the
    rows out over ``problem.workers`` threads. Results are always assembled in
    row order.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S = X.shape[0]
    lv = problem.levels[level - 1] if 1 <= level <= problem.n_levels else None
    if lv is None:
        raise ValueError(f"level {level} outside 1..{problem.n_levels}")
    if lv.batch is not None:
        B = problem.noise(U_noise)
        F, C = lv.batch(X, B)
        F = np.asarray(F, dtype=float).reshape(S)
        C = np.asarray(C, dtype=float).reshape(S, problem.n_constraints)
        bad = ~np.isfinite(F) | ~np.all(np.isfinite(C), axis=1)
        if bad.any():
            i = int(np.argmax(bad))
            raise EvaluationError("non-finite value from black box", level, X[i], i)
        problem.counter.add(level, S)
        return F, C

    def one(i):
        try:
            return evaluate(problem, level, X[i], U_noise[i])
        except EvaluationError as err:
            if err.index is None:
                err.index = i
            raise

    if problem.workers > 1 and S > 1:
        with ThreadPoolExecutor(max_workers=problem.workers) as pool:
            results = list(pool.map(one, range(S)))
    else:
        results = [one(i) for i in range(S)]
    F = np.array([r[0] for r in results], dtype=float)
    C = np.array([r[1] for r in results], dtype=float).reshape(S, problem.n_constraints)
    return F, C
