"""Score-function estimators of the gradient of the smoothed objective.

All estimators return gradients in ``(mu, log_sigma)`` coordinates, packed as
a :class:`~scoutnd.policy.ThetaGrad`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .objective import ProblemSpec, augmented_objective, evaluate_batch
from .policy import GaussianPolicy, ThetaGrad, sample, score
from .sampling import SampleBatch


class Estimator(str, enum.Enum):
    PLAIN = "PLAIN"
    BASELINE = "BASELINE"
    BASELINE_QMC = "BASELINE_QMC"
    MULTIFIDELITY = "MULTIFIDELITY"


@dataclass(frozen=True)
class GradEstimate:
    grad: ThetaGrad
    # Sample variance of the per-sample gradient terms. For the multi-fidelity
    # estimator it is the sum of those variances over levels.
    per_component_variance: np.ndarray
    # Estimated variance of ``grad`` itself (term variance / S, summed over levels).
    estimator_variance: np.ndarray
    evals_by_level: np.ndarray
    batch_mean_L: float

    @property
    def total_evals(self) -> int:
        return int(self.evals_by_level.sum())


def _loo_residuals(values: np.ndarray) -> np.ndarray:
    """``v_i - mean_{j != i} v_j`` for every i.

    Values are shifted by the first entry before summing; the residual is
    shift-invariant and a constant input gives exactly zero.
    """
    S = values.size
    d = values - values[0]
    return (S * d - d.sum()) / (S - 1)


def _terms_stats(terms: np.ndarray):
    S = terms.shape[0]
    mean = terms.mean(axis=0)
    var = terms.var(axis=0, ddof=1) if S > 1 else np.zeros(terms.shape[1])
    return mean, var


def _augmented(policy, problem, level, lam, batch):
    X = sample(policy, batch.u_design)
    F, C = evaluate_batch(problem, level, X, batch.u_noise)
    return X, augmented_objective(F, C, lam)


def _lam(problem: ProblemSpec, lam) -> np.ndarray:
    lam = np.zeros(0) if lam is None else np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != problem.n_constraints:
        raise ValueError(f"{lam.size} penalties for {problem.n_constraints} constraints")
    return lam


def _result(terms, evals, mean_L) -> GradEstimate:
    g, var = _terms_stats(terms)
    return GradEstimate(ThetaGrad.from_flat(g), var, var / terms.shape[0], evals, float(mean_L))


def sf_plain(policy: GaussianPolicy, problem: ProblemSpec, level: int, lam, batch: SampleBatch) -> GradEstimate:
    """Plain score-function estimator: ``mean_i L_i * score(x_i)``."""
    lam = _lam(problem, lam)
    X, Lv = _augmented(policy, problem, level, lam, batch)
    terms = Lv[:, None] * score(policy, X).flat()
    evals = np.zeros(problem.n_levels, dtype=np.int64)
    evals[level - 1] = batch.size
    return _result(terms, evals, Lv.mean())


def sf_baseline(policy: GaussianPolicy, problem: ProblemSpec, level: int, lam, batch: SampleBatch) -> GradEstimate:
    """Score-function estimator with the leave-one-out baseline."""
    if batch.size < 2:
        raise ValueError("the leave-one-out baseline needs S >= 2")
    lam = _lam(problem, lam)
    X, Lv = _augmented(policy, problem, level, lam, batch)
    terms = _loo_residuals(Lv)[:, None] * score(policy, X).flat()
    evals = np.zeros(problem.n_levels, dtype=np.int64)
    evals[level - 1] = batch.size
    return _result(terms, evals, Lv.mean())


def sf_multifidelity(policy: GaussianPolicy, problem: ProblemSpec, lam, batches: Sequence[SampleBatch]) -> GradEstimate:
    """Telescoping multi-fidelity estimator over levels ``1..len(batches)``.

    Level 1 is the cheapest model. For level ``l >= 2`` each sample is run
    through both level ``l`` and ``l - 1`` with the same design and noise, and
    the leave-one-out baseline is applied to the coupled differences.
    """
    if not 1 <= len(batches) <= problem.n_levels:
        raise ValueError(f"need between 1 and {problem.n_levels} batches, got {len(batches)}")
    lam = _lam(problem, lam)
    evals = np.zeros(problem.n_levels, dtype=np.int64)
    grad = np.zeros(2 * policy.dim)
    var_terms = np.zeros(2 * policy.dim)
    var_est = np.zeros(2 * policy.dim)
    mean_L = 0.0
    for level, batch in enumerate(batches, start=1):
        if batch.size < 2:
            raise ValueError(f"level {level} needs S >= 2 samples, got {batch.size}")
        X, L_hi = _augmented(policy, problem, level, lam, batch)
        evals[level - 1] += batch.size
        if level > 1:
            _, L_lo = _augmented(policy, problem, level - 1, lam, batch)
            evals[level - 2] += batch.size
            diff = L_hi - L_lo
        else:
            diff = L_hi
        terms = _loo_residuals(diff)[:, None] * score(policy, X).flat()
        g, var = _terms_stats(terms)
        grad += g
        var_terms += var
        var_est += var / batch.size
        mean_L += diff.mean()
    return GradEstimate(ThetaGrad.from_flat(grad), var_terms, var_est, evals, float(mean_L))


def estimate(kind: Estimator, policy, problem, lam, batches: Sequence[SampleBatch], level: int | None = None) -> GradEstimate:
    """Dispatch on estimator kind. Single-level estimators use ``batches[0]`` at
    ``level`` (default: the highest fidelity)."""
    kind = Estimator(kind)
    if kind is Estimator.MULTIFIDELITY:
        return sf_multifidelity(policy, problem, lam, batches)
    level = problem.n_levels if level is None else level
    if kind is Estimator.PLAIN:
        return sf_plain(policy, problem, level, lam, batches[0])
    return sf_baseline(policy, problem, level, lam, batches[0])


@dataclass(frozen=True)
class VarianceReport:
    per_component: np.ndarray
    max: float
    mean: float
    trace: float


def variance_report(estimates) -> VarianceReport:
    """Componentwise sample variance across repeated gradient estimates."""
    rows = [e.grad.flat() if isinstance(e, GradEstimate) else
            (e.flat() if isinstance(e, ThetaGrad) else np.asarray(e, dtype=float)) for e in estimates]
    G = np.vstack(rows)
    if G.shape[0] < 2:
        raise ValueError("variance needs at least 2 repetitions")
    v = G.var(axis=0, ddof=1)
    return VarianceReport(v, float(v.max()), float(v.mean()), float(v.sum()))
