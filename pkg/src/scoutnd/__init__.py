"""Constrained stochastic optimization of black-box simulators.

A Gaussian search distribution over the design is tuned with ADAM, using
score-function gradient estimates (optionally with a leave-one-out baseline,
scrambled Sobol sampling, or a multi-fidelity telescoping sum). Constraints
enter through a penalty whose weight grows between outer rounds.
"""
from .benchmarks import ExternalSimSpec, ExternalSimulator, SphereCase, SphereConfig, make_sphere
from .gradest import Estimator, GradEstimate, sf_baseline, sf_multifidelity, sf_plain, variance_report
from .objective import (
    EvaluationError,
    PenaltySchedule,
    ProblemSpec,
    augmented_objective,
    evaluate,
    geometric_schedule,
)
from .optimizer import AdamState, Optimizer, RunConfig, RunResult, StopReason, adam_step, initial_policy, run
from .policy import GaussianPolicy, ThetaGrad, log_density, sample, score
from .sampling import SampleBatch, Scheme, draw_batch, draw_pseudo, draw_sobol
from .trace import EvalTrace

__version__ = "0.1.0"
