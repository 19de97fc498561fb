"""Run configuration files.

The format is INI (``configparser``): sections ``[meta]``, ``[run]``,
``[problem]``, ``[optimizer]``, ``[bench]``, ``[profile]`` and ``[variance]``.
Lists are comma separated. Every section and key is optional except
``[problem] dims``; unknown sections or keys are rejected. Values may be
overridden from the environment as ``SCOUTND_<SECTION>_<KEY>``, e.g.
``SCOUTND_OPTIMIZER_LR_MU=0.01``.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
import typing
from dataclasses import dataclass, field
from typing import Optional

from .benchmarks import SphereCase, SphereConfig
from .gradest import Estimator
from .objective import geometric_schedule
from .optimizer import RunConfig

SCHEMA_VERSION = 1
ENV_PREFIX = "SCOUTND_"


class ConfigError(ValueError):
    pass


@dataclass
class MetaSection:
    schema_version: int = SCHEMA_VERSION


@dataclass
class RunSection:
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    verbosity: int = 0


@dataclass
class ProblemSection:
    dims: tuple = ()
    kind: str = "sphere"
    case: int = 1
    noise: float = 0.1
    noise_param: str = "variance"
    lf_scale: float = 1.05
    lf_cost: float = 0.1
    lf_scale_constraints: bool = True
    mu0: float = 1.0
    sigma0: float = 1.0


@dataclass
class OptimizerSection:
    estimator: str = "BASELINE_QMC"
    samples_per_level: tuple = (50,)
    lambda0: float = 1.0
    ratio: float = 2.0
    K: int = 4
    eps_theta: float = 1e-4
    eps_sigma: Optional[float] = None
    max_inner_steps: int = 500
    max_outer_rounds: int = 8
    max_total_evals: float = 50000.0
    lr_mu: float = 0.02
    lr_log_sigma: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass
class BenchSection:
    methods: tuple = ("scout-nd", "mf-scout-nd")
    seeds: tuple = (0, 1, 2, 3, 4)
    cases: tuple = (1, 2)
    eps_f: float = 0.1
    scout_samples: int = 50
    mf_samples: tuple = (50, 10)


@dataclass
class ProfileSection:
    traces: tuple = ()
    counting: str = "evals"
    alpha_min: float = 1.0
    alpha_max: float = 10000.0
    alpha_points: int = 200
    eps_f: float = 0.1


@dataclass
class VarianceSection:
    dims: tuple = (2, 4, 8, 16, 32)
    samples: int = 128
    repetitions: int = 10
    estimates_per_repetition: int = 10


# Element types of tuple-valued keys.
_TUPLE_ITEMS = {
    ("problem", "dims"): int,
    ("optimizer", "samples_per_level"): int,
    ("bench", "methods"): str,
    ("bench", "seeds"): int,
    ("bench", "cases"): int,
    ("bench", "mf_samples"): int,
    ("profile", "traces"): str,
    ("variance", "dims"): int,
}

SECTIONS = {
    "meta": MetaSection,
    "run": RunSection,
    "problem": ProblemSection,
    "optimizer": OptimizerSection,
    "bench": BenchSection,
    "profile": ProfileSection,
    "variance": VarianceSection,
}

METHOD_ESTIMATORS = {
    "scout-nd": Estimator.BASELINE_QMC,
    "scout-nd-plain": Estimator.PLAIN,
    "scout-nd-baseline": Estimator.BASELINE,
    "mf-scout-nd": Estimator.MULTIFIDELITY,
}


@dataclass
class Config:
    meta: MetaSection = field(default_factory=MetaSection)
    run: RunSection = field(default_factory=RunSection)
    problem: ProblemSection = field(default_factory=ProblemSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    bench: BenchSection = field(default_factory=BenchSection)
    profile: ProfileSection = field(default_factory=ProfileSection)
    variance: VarianceSection = field(default_factory=VarianceSection)

    # -- derived objects --

    def sphere(self, d: int) -> SphereConfig:
        p = self.problem
        return SphereConfig(d=d, case=SphereCase(p.case), noise=p.noise, noise_param=p.noise_param,
                            lf_scale=p.lf_scale, lf_cost=p.lf_cost, lf_scale_constraints=p.lf_scale_constraints)

    def run_config(self, n_constraints: int, estimator=None, samples=None) -> RunConfig:
        o = self.optimizer
        sched = geometric_schedule([o.lambda0] * n_constraints, o.ratio, o.K)
        return RunConfig(
            estimator=Estimator(estimator or o.estimator),
            samples_per_level=tuple(samples or o.samples_per_level),
            schedule=sched,
            eps_theta=o.eps_theta,
            eps_sigma=o.eps_sigma,
            max_inner_steps=o.max_inner_steps,
            max_outer_rounds=o.max_outer_rounds,
            max_total_evals=o.max_total_evals,
            seed=self.run.seed,
            lr_mu=o.lr_mu,
            lr_log_sigma=o.lr_log_sigma,
            beta1=o.beta1,
            beta2=o.beta2,
            adam_eps=o.adam_eps,
        )

    def bench_methods(self, n_constraints: int) -> dict:
        out = {}
        for m in self.bench.methods:
            est = METHOD_ESTIMATORS[m]
            samples = self.bench.mf_samples if est is Estimator.MULTIFIDELITY else (self.bench.scout_samples,)
            out[m] = self.run_config(n_constraints, est, samples)
        return out


def _convert(section: str, key: str, hint, raw: str):
    raw = raw.strip()
    origin = typing.get_origin(hint)
    if origin is typing.Union:  # Optional[x]
        if raw.lower() in ("", "none", "auto"):
            return None
        hint = [a for a in typing.get_args(hint) if a is not type(None)][0]
    if hint is tuple or origin is tuple:
        item = _TUPLE_ITEMS[(section, key)]
        return tuple(item(v.strip()) for v in raw.split(",") if v.strip())
    if hint is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if hint is int:
        return int(raw)
    if hint is float:
        return float(raw)
    return raw


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _validate(cfg: Config) -> None:
    if cfg.meta.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version {cfg.meta.schema_version} != supported {SCHEMA_VERSION}")
    if not cfg.problem.dims:
        raise ConfigError("missing required key [problem] dims")
    if cfg.problem.kind != "sphere":
        raise ConfigError(f"unknown problem kind {cfg.problem.kind!r} (only 'sphere' is built in)")
    try:
        SphereCase(cfg.problem.case)
        Estimator(cfg.optimizer.estimator)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    for m in cfg.bench.methods:
        if m not in METHOD_ESTIMATORS:
            raise ConfigError(f"unknown bench method {m!r}; known: {', '.join(METHOD_ESTIMATORS)}")
    if cfg.profile.counting not in ("evals", "hf_cost"):
        raise ConfigError("[profile] counting must be 'evals' or 'hf_cost'")
    if cfg.run.workers < 1:
        raise ConfigError("[run] workers must be >= 1")


def parse_config(path=None, text: Optional[str] = None, env: Optional[dict] = None) -> Config:
    """Read a config file (or ``text``), apply environment overrides, validate.

    Raises :class:`ConfigError` naming the offending section/key.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        if text is not None:
            cp.read_string(text)
        else:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from err

    cfg = Config()
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        obj = getattr(cfg, sec)
        hints = typing.get_type_hints(type(obj))
        for key, raw in cp.items(sec):
            if key not in hints:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            try:
                setattr(obj, key, _convert(sec, key, hints[key], raw))
            except (ValueError, KeyError) as err:
                raise ConfigError(f"bad value for [{sec}] {key}: {err}") from err

    env = os.environ if env is None else env
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        sec, _, key = rest.partition("_")
        if sec not in SECTIONS:
            continue
        obj = getattr(cfg, sec)
        hints = typing.get_type_hints(type(obj))
        match = {k.lower(): k for k in hints}.get(key)
        if match is None:
            raise ConfigError(f"environment override {name} names no config key")
        try:
            setattr(obj, match, _convert(sec, match, hints[match], raw))
        except (ValueError, KeyError) as err:
            raise ConfigError(f"bad value in {name}: {err}") from err

    _validate(cfg)
    return cfg


def dump_config(cfg: Config) -> str:
    """Every key, defaults included; parsing the output gives back ``cfg``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec in SECTIONS:
        obj = getattr(cfg, sec)
        cp[sec] = {f.name: _format(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    from io import StringIO

    buf = StringIO()
    cp.write(buf)
    return buf.getvalue()
