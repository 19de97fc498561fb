"""ADAM-driven stochastic optimization of the search distribution.

The run is a double loop. The inner loop takes ADAM steps on ``(mu, log_sigma)``
with a fresh sample batch each step until the parameters stagnate; the outer
loop then raises the constraint penalty and restarts the inner loop from the
current parameters, until the search distribution has collapsed
(``||sigma|| <= eps_sigma``) or a budget runs out.
"""
from __future__ import annotations

import enum
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .gradest import Estimator, GradEstimate, estimate
from .objective import PenaltySchedule, ProblemSpec, default_schedule
from .policy import GaussianPolicy, ThetaGrad
from .sampling import Scheme, draw_batch
from .trace import EvalTrace

CHECKPOINT_VERSION = 1


class StopReason(str, enum.Enum):
    SIGMA_COLLAPSE = "SIGMA_COLLAPSE"
    BUDGET = "BUDGET"
    MAX_ROUNDS = "MAX_ROUNDS"


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class AdamState:
    lr_mu: float
    lr_log_sigma: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    step_count: int = 0

    @classmethod
    def init(cls, dim: int, lr_mu=0.02, lr_log_sigma=0.02, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(lr_mu, lr_log_sigma, beta1, beta2, eps, np.zeros(2 * dim), np.zeros(2 * dim), 0)


def adam_step(state: AdamState, theta: np.ndarray, grad) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected ADAM descent step on the packed ``(mu, log_sigma)`` vector."""
    g = grad.flat() if isinstance(grad, ThetaGrad) else np.asarray(grad, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if g.shape != theta.shape or state.m.shape != theta.shape:
        raise ValueError("theta, gradient and moment shapes differ")
    d = theta.size // 2
    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    lr = np.concatenate([np.full(d, state.lr_mu), np.full(theta.size - d, state.lr_log_sigma)])
    new_theta = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step_count=t), new_theta


@dataclass(frozen=True)
class RunConfig:
    estimator: Estimator = Estimator.BASELINE_QMC
    # One entry per level for MULTIFIDELITY (lowest fidelity first), else a single count.
    samples_per_level: tuple = (50,)
    schedule: Optional[PenaltySchedule] = None
    eps_theta: float = 1e-4
    eps_sigma: Optional[float] = None  # default 0.02 * sqrt(d)
    max_inner_steps: int = 500
    max_outer_rounds: int = 8
    # Budget in HF-equivalent evaluations (raw count for single-fidelity runs).
    max_total_evals: float = 50_000
    seed: int = 0
    lr_mu: float = 0.02
    lr_log_sigma: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "samples_per_level", tuple(int(s) for s in self.samples_per_level))
        if self.eps_theta <= 0 or (self.eps_sigma is not None and self.eps_sigma <= 0):
            raise ValueError("eps_theta and eps_sigma must be > 0")
        if min(self.max_inner_steps, self.max_outer_rounds) < 1 or self.max_total_evals < 1:
            raise ValueError("budgets must be >= 1")
        if not self.samples_per_level or min(self.samples_per_level) < 1:
            raise ValueError("samples_per_level must be nonempty and positive")
        if self.estimator is not Estimator.MULTIFIDELITY and len(self.samples_per_level) != 1:
            raise ValueError("single-level estimators take exactly one sample count")

    def sigma_tol(self, dim: int) -> float:
        return self.eps_sigma if self.eps_sigma is not None else 0.02 * math.sqrt(dim)

    def fingerprint(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "schedule"}
        out["estimator"] = self.estimator.value
        out["samples_per_level"] = list(self.samples_per_level)
        out["schedule"] = None if self.schedule is None else [lam.tolist() for lam in self.schedule.lambdas]
        return out


@dataclass
class RunResult:
    final_mu: np.ndarray
    final_sigma: np.ndarray
    trace: EvalTrace
    theta_history: list
    converged: bool
    reason: StopReason
    rounds: int
    evals_by_level: list
    hf_cost: float


def hf_equivalent_cost(evals_by_level, costs) -> float:
    """Evaluation counts weighted by level cost relative to the top level."""
    costs = np.asarray(costs, dtype=float)
    return float(np.dot(np.asarray(evals_by_level, dtype=float), costs / costs[-1]))


def planned_evals(problem: ProblemSpec, config: RunConfig) -> np.ndarray:
    """Per-level evaluation counts charged by one inner step."""
    evals = np.zeros(problem.n_levels, dtype=np.int64)
    if config.estimator is Estimator.MULTIFIDELITY:
        for level, S in enumerate(config.samples_per_level, start=1):
            evals[level - 1] += S
            if level > 1:
                evals[level - 2] += S
    else:
        evals[-1] = config.samples_per_level[0]
    return evals


def initial_policy(mu0, sigma0=1.0) -> GaussianPolicy:
    mu0 = np.asarray(mu0, dtype=float)
    return GaussianPolicy(mu0, np.log(np.broadcast_to(np.asarray(sigma0, dtype=float), mu0.shape)))


def _batch_seed(seed: int, step: int, level: int) -> int:
    ss = np.random.SeedSequence([seed & (2**64 - 1), step, level])
    return int(ss.generate_state(1, np.uint64)[0])


class Optimizer:
    """Resumable state machine for one run. Use :func:`run` for the common case."""

    def __init__(self, problem: ProblemSpec, policy0: GaussianPolicy, config: RunConfig):
        if policy0.dim != problem.dim:
            raise ValueError(f"policy dimension {policy0.dim} != problem dimension {problem.dim}")
        if config.estimator is Estimator.MULTIFIDELITY and len(config.samples_per_level) > problem.n_levels:
            raise ValueError("more sample counts than fidelity levels")
        self.problem = problem
        self.config = config
        self.schedule = config.schedule or default_schedule(problem.n_constraints)
        if self.schedule.lambdas[0].size != problem.n_constraints:
            raise ValueError("penalty vectors do not match the problem's constraint count")
        self.theta = policy0.flat()
        self.adam = AdamState.init(problem.dim, config.lr_mu, config.lr_log_sigma,
                                   config.beta1, config.beta2, config.adam_eps)
        self.round = 0
        self.inner = 0
        self.step_index = 0
        self.evals = np.zeros(problem.n_levels, dtype=np.int64)
        self.trace = EvalTrace()
        self.theta_history: list = []
        self.done = False
        self.reason: Optional[StopReason] = None
        self._step_evals = planned_evals(problem, config)
        problem.counter.reset()

    # -- core loop --

    @property
    def policy(self) -> GaussianPolicy:
        return GaussianPolicy.from_flat(self.theta)

    @property
    def hf_cost(self) -> float:
        return hf_equivalent_cost(self.evals, self.problem.costs)

    def _batches(self):
        p = self.problem
        scheme = Scheme.PSEUDO if self.config.estimator in (Estimator.PLAIN, Estimator.BASELINE) else Scheme.QMC
        if self.config.estimator is Estimator.MULTIFIDELITY:
            return [draw_batch(p.dim, p.noise_dim, S, _batch_seed(self.config.seed, self.step_index, lv), scheme)
                    for lv, S in enumerate(self.config.samples_per_level, start=1)]
        S = self.config.samples_per_level[0]
        return [draw_batch(p.dim, p.noise_dim, S, _batch_seed(self.config.seed, self.step_index, p.n_levels), scheme)]

    def _record(self, est: GradEstimate):
        p = self.problem
        mu = self.theta[: p.dim]
        top = p.n_levels if self.config.estimator is not Estimator.MULTIFIDELITY else len(self.config.samples_per_level)
        if p.reference is not None:
            f, c = p.reference(mu)
        else:
            f, c = est.batch_mean_L, np.full(p.n_constraints, np.nan)
        self.trace.append(int(self.evals.sum()), top, self.hf_cost, float(f), c)

    def step(self) -> bool:
        """Advance by one inner iteration (or finish). Returns False once done."""
        if self.done:
            return False
        cfg = self.config
        d = self.problem.dim
        if self.hf_cost + hf_equivalent_cost(self._step_evals, self.problem.costs) > cfg.max_total_evals:
            self._finish(StopReason.BUDGET)
            return False
        lam = self.schedule[self.round]
        est = estimate(cfg.estimator, self.policy, self.problem, lam, self._batches())
        self.evals += est.evals_by_level
        old = self.theta
        self.adam, self.theta = adam_step(self.adam, self.theta, est.grad)
        self.step_index += 1
        self.inner += 1
        self.theta_history.append((self.round, self.inner, self.theta.copy(), est.batch_mean_L))
        self._record(est)

        moved = np.concatenate([self.theta[:d] - old[:d], np.exp(self.theta[d:]) - np.exp(old[d:])])
        if np.linalg.norm(moved) <= cfg.eps_theta or self.inner >= cfg.max_inner_steps:
            self.round += 1
            self.inner = 0
            if np.linalg.norm(np.exp(self.theta[d:])) <= cfg.sigma_tol(d):
                self._finish(StopReason.SIGMA_COLLAPSE)
            elif self.round >= cfg.max_outer_rounds:
                self._finish(StopReason.MAX_ROUNDS)
        return not self.done

    def _finish(self, reason: StopReason):
        self.done = True
        self.reason = reason

    def run(self, max_steps: Optional[int] = None, checkpoint_path=None, checkpoint_every: int = 0) -> Optional[RunResult]:
        """Step until done. With ``max_steps`` the call may return ``None`` early
        (the run is resumable from :meth:`state_dict`)."""
        taken = 0
        while not self.done:
            if max_steps is not None and taken >= max_steps:
                return None
            self.step()
            taken += 1
            if checkpoint_path and checkpoint_every and self.step_index % checkpoint_every == 0:
                save_checkpoint(self, checkpoint_path)
        if checkpoint_path:
            save_checkpoint(self, checkpoint_path)
        return self.result()

    def result(self) -> RunResult:
        d = self.problem.dim
        return RunResult(
            final_mu=self.theta[:d].copy(),
            final_sigma=np.exp(self.theta[d:]),
            trace=self.trace,
            theta_history=list(self.theta_history),
            converged=self.reason is StopReason.SIGMA_COLLAPSE,
            reason=self.reason,
            rounds=self.round,
            evals_by_level=[int(e) for e in self.evals],
            hf_cost=self.hf_cost,
        )

    # -- checkpointing --

    def state_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config": self.config.fingerprint(),
            "dim": self.problem.dim,
            "theta": self.theta.tolist(),
            "adam": {"m": self.adam.m.tolist(), "v": self.adam.v.tolist(), "step_count": self.adam.step_count},
            "round": self.round,
            "inner": self.inner,
            "step_index": self.step_index,
            "evals": [int(e) for e in self.evals],
            "trace": [[r.eval_index, r.level, r.hf_cost, r.f, list(r.c)] for r in self.trace.records],
            "theta_history": [[k, n, th.tolist(), mL] for k, n, th, mL in self.theta_history],
            "done": self.done,
            "reason": None if self.reason is None else self.reason.value,
        }

    def load_state_dict(self, state: dict) -> None:
        """Restore from :meth:`state_dict`. Validates fully before mutating."""
        try:
            if state.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"checkpoint version {state.get('version')} != {CHECKPOINT_VERSION}")
            if state["config"] != json.loads(json.dumps(self.config.fingerprint())):
                raise CheckpointError("checkpoint was written with a different run configuration")
            d = self.problem.dim
            if state["dim"] != d:
                raise CheckpointError("checkpoint dimension does not match the problem")
            theta = np.array(state["theta"], dtype=float)
            m = np.array(state["adam"]["m"], dtype=float)
            v = np.array(state["adam"]["v"], dtype=float)
            if theta.shape != (2 * d,) or m.shape != theta.shape or v.shape != theta.shape:
                raise CheckpointError("checkpoint arrays have the wrong shape")
            evals = np.array(state["evals"], dtype=np.int64)
            if evals.shape != (self.problem.n_levels,):
                raise CheckpointError("checkpoint level counts do not match the problem")
            trace = EvalTrace()
            for idx, lv, hf, f, c in state["trace"]:
                trace.append(idx, lv, hf, f, c)
            history = [(int(k), int(n), np.array(th, dtype=float), float(mL)) for k, n, th, mL in state["theta_history"]]
            reason = None if state["reason"] is None else StopReason(state["reason"])
            scalars = (int(state["round"]), int(state["inner"]), int(state["step_index"]),
                       int(state["adam"]["step_count"]), bool(state["done"]))
        except CheckpointError:
            raise
        except (KeyError, TypeError, ValueError) as err:
            raise CheckpointError(f"malformed checkpoint: {err}") from err
        self.theta = theta
        self.adam = replace(self.adam, m=m, v=v, step_count=scalars[3])
        self.round, self.inner, self.step_index = scalars[:3]
        self.done = scalars[4]
        self.evals = evals
        self.trace = trace
        self.theta_history = history
        self.reason = reason
        self.problem.counter.set(evals)


def save_checkpoint(opt: Optimizer, path) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(opt.state_dict(), fh)
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            state = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    if not isinstance(state, dict):
        raise CheckpointError(f"{path} is not a checkpoint")
    return state


def resume(problem: ProblemSpec, config: RunConfig, path) -> Optimizer:
    state = load_checkpoint(path)
    d = problem.dim
    opt = Optimizer(problem, GaussianPolicy(np.zeros(d), np.zeros(d)), config)
    opt.load_state_dict(state)
    return opt


def run(problem: ProblemSpec, policy0: GaussianPolicy, config: RunConfig = RunConfig()) -> RunResult:
    return Optimizer(problem, policy0, config).run()
