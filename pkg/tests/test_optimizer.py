import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scoutnd.benchmarks import SphereCase, SphereConfig, make_sphere
from scoutnd.gradest import Estimator
from scoutnd.objective import geometric_schedule
from scoutnd.optimizer import (
    AdamState,
    CheckpointError,
    Optimizer,
    RunConfig,
    StopReason,
    adam_step,
    hf_equivalent_cost,
    initial_policy,
    load_checkpoint,
    resume,
    run,
    save_checkpoint,
)


def _problem(d, case):
    return make_sphere(SphereConfig(d=d, case=SphereCase(case)))


def test_adam_zero_gradient():
    theta = np.array([0.5, -0.5, 0.1, 0.2])
    st1, th1 = adam_step(AdamState.init(2), theta, np.zeros(4))
    np.testing.assert_array_equal(th1, theta)
    warm = AdamState(0.1, 0.1, m=np.ones(4), v=np.ones(4), step_count=3)
    st2, _ = adam_step(warm, theta, np.zeros(4))
    assert np.all(st2.m < warm.m) and np.all(st2.v < warm.v) and st2.step_count == 4


@given(st.lists(st.floats(1e-2, 1e3) | st.floats(-1e3, -1e-2), min_size=2, max_size=2))
def test_adam_first_step_is_signed_lr(g):
    g = np.array(g + [v * 0.5 for v in g])
    s = AdamState.init(2, lr_mu=0.05, lr_log_sigma=0.02)
    _, th = adam_step(s, np.zeros(4), g)
    np.testing.assert_allclose(th, -np.array([0.05, 0.05, 0.02, 0.02]) * np.sign(g), rtol=1e-5)


def test_adam_quadratic():
    s = AdamState.init(1, lr_mu=0.1)
    theta = np.array([1.0, 0.0])
    for _ in range(500):
        s, theta = adam_step(s, theta, np.array([2 * theta[0], 0.0]))
    assert abs(theta[0]) < 1e-3 and s.step_count == 500


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step(AdamState.init(2), np.zeros(4), np.zeros(3))


def test_hf_equivalent_cost():
    assert hf_equivalent_cost([50, 10], [0.1, 1.0]) == pytest.approx(15.0)
    assert hf_equivalent_cost([0, 50], [0.1, 1.0]) == 50.0


def test_unconstrained_sphere_converges():
    res = run(_problem(2, 0), initial_policy([1.0, 1.0]), RunConfig(seed=0))
    assert float(np.sum(res.final_mu**2)) <= 0.05
    assert res.hf_cost <= 50_000


def test_case1_d2_near_boundary_optimum():
    res = run(_problem(2, 1), initial_policy([1.0, 1.0]), RunConfig(seed=1))
    assert np.linalg.norm(res.final_mu - [0.5, 0.5]) <= 0.1


def test_case2_d8_reaches_origin():
    p = _problem(8, 2)
    res = run(p, initial_policy(np.ones(8)), RunConfig(seed=2))
    assert p.reference(res.final_mu)[0] <= 0.1


def test_determinism_bitwise():
    cfg = RunConfig(seed=7, max_total_evals=3000)
    a = run(_problem(3, 1), initial_policy(np.ones(3)), cfg)
    b = run(_problem(3, 1), initial_policy(np.ones(3)), cfg)
    assert len(a.theta_history) == len(b.theta_history) > 0
    for (ka, na, ta, la), (kb, nb, tb, lb) in zip(a.theta_history, b.theta_history):
        assert (ka, na, la) == (kb, nb, lb) and np.array_equal(ta, tb)


def test_budget_stop_and_trace_order():
    cfg = RunConfig(seed=0, max_total_evals=1000)
    res = run(_problem(2, 1), initial_policy(np.ones(2)), cfg)
    assert res.reason is StopReason.BUDGET and not res.converged
    assert res.hf_cost <= 1000 and res.evals_by_level == [0, 1000]
    idx = res.trace.column("eval_index")
    assert np.all(np.diff(idx) > 0)
    best = res.trace.column("best_feasible_so_far")
    assert np.all(np.diff(best[np.isfinite(best)]) <= 0)


def test_mf_budget_counts_hf_equivalents():
    cfg = RunConfig(estimator=Estimator.MULTIFIDELITY, samples_per_level=(50, 10), seed=0, max_total_evals=160)
    res = run(_problem(2, 1), initial_policy(np.ones(2)), cfg)
    # each step: 50 + 10 coupled LF and 10 HF calls -> 6 + 10 = 16 HF-equivalents
    assert res.evals_by_level == [600, 100] and res.hf_cost == pytest.approx(160.0)


def test_sigma_collapse_stop():
    cfg = RunConfig(seed=0, eps_sigma=0.1, lr_log_sigma=0.1, max_inner_steps=100, max_total_evals=200_000)
    res = run(_problem(2, 0), initial_policy(np.ones(2)), cfg)
    assert res.reason is StopReason.SIGMA_COLLAPSE and res.converged
    assert np.linalg.norm(res.final_sigma) <= 0.1


def test_max_rounds_and_schedule_reuse():
    sched = geometric_schedule([1.0], 2.0, 2)
    cfg = RunConfig(seed=0, schedule=sched, max_inner_steps=5, max_outer_rounds=4, max_total_evals=1e6)
    res = run(_problem(2, 1), initial_policy(np.ones(2)), cfg)
    assert res.reason is StopReason.MAX_ROUNDS and res.rounds == 4
    assert [k for k, *_ in res.theta_history] == [0] * 5 + [1] * 5 + [2] * 5 + [3] * 5


def test_upper_bound_sanity():
    p = _problem(2, 0)
    cfg = RunConfig(seed=3, max_total_evals=10_000)
    res = run(p, initial_policy([1.0, 1.0]), cfg)
    S = cfg.samples_per_level[0]
    se_floor = SphereConfig(d=2).noise_std / math.sqrt(S)
    U = np.array([mL for *_, mL in res.theta_history])
    assert np.all(U >= p.known_optimum - 3 * se_floor)
    assert U[-10:].mean() < U[:10].mean()


def test_feasibility_improves_across_rounds():
    per_seed = []
    for seed in range(5):
        res = run(_problem(2, 1), initial_policy([1.0, 1.0]), RunConfig(seed=seed))
        rounds: dict = {}
        for (k, *_), rec in zip(res.theta_history, res.trace.records):
            rounds.setdefault(k, []).append(max(rec.c[0], 0.0))
        per_seed.append([np.mean(v) for _, v in sorted(rounds.items())])
    n = min(len(r) for r in per_seed)
    med = np.median([r[:n] for r in per_seed], axis=0)
    assert n >= 2 and np.all(np.diff(med) <= 0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        Optimizer(_problem(3, 1), initial_policy(np.ones(2)), RunConfig())


def test_runconfig_validation():
    with pytest.raises(ValueError):
        RunConfig(eps_theta=0)
    with pytest.raises(ValueError):
        RunConfig(samples_per_level=(50, 10))
    with pytest.raises(ValueError):
        RunConfig(max_total_evals=0)


CKPT_CFG = RunConfig(seed=5, max_inner_steps=40, max_total_evals=6000)


def _fresh():
    return Optimizer(_problem(3, 1), initial_policy(np.ones(3)), CKPT_CFG)


def _same(a, b):
    assert np.array_equal(a.final_mu, b.final_mu) and np.array_equal(a.final_sigma, b.final_sigma)
    assert a.reason == b.reason and a.rounds == b.rounds and a.evals_by_level == b.evals_by_level
    assert [(r.eval_index, r.f) for r in a.trace.records] == [(r.eval_index, r.f) for r in b.trace.records]
    for x, y in zip(a.theta_history, b.theta_history):
        assert np.array_equal(x[2], y[2])


def test_checkpoint_at_start(tmp_path):
    ref = _fresh().run()
    opt = _fresh()
    save_checkpoint(opt, tmp_path / "c.json")
    _same(resume(_problem(3, 1), CKPT_CFG, tmp_path / "c.json").run(), ref)


def test_checkpoint_mid_run(tmp_path):
    ref = _fresh().run()
    opt = _fresh()
    assert opt.run(max_steps=57) is None
    save_checkpoint(opt, tmp_path / "c.json")
    del opt
    resumed = resume(_problem(3, 1), CKPT_CFG, tmp_path / "c.json")
    _same(resumed.run(), ref)


def test_periodic_checkpoint_file(tmp_path):
    path = tmp_path / "c.json"
    res = _fresh().run(checkpoint_path=path, checkpoint_every=10)
    state = load_checkpoint(path)
    assert state["done"] and state["reason"] == res.reason.value


def test_corrupt_checkpoint_leaves_state(tmp_path):
    opt = _fresh()
    opt.run(max_steps=5)
    before = (opt.theta.copy(), opt.step_index, opt.evals.copy())
    path = tmp_path / "c.json"
    path.write_text('{"version": 1, "theta": [1, 2')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    state = opt.state_dict()
    state["theta"] = state["theta"][:-1]
    with pytest.raises(CheckpointError):
        opt.load_state_dict(state)
    state = opt.state_dict()
    del state["adam"]
    with pytest.raises(CheckpointError):
        opt.load_state_dict(state)
    assert np.array_equal(opt.theta, before[0]) and opt.step_index == before[1]
    assert np.array_equal(opt.evals, before[2])


def test_checkpoint_version_and_config_mismatch(tmp_path):
    opt = _fresh()
    opt.run(max_steps=3)
    path = tmp_path / "c.json"
    save_checkpoint(opt, path)
    state = json.loads(path.read_text())
    state["version"] = 99
    path.write_text(json.dumps(state))
    with pytest.raises(CheckpointError, match="version"):
        resume(_problem(3, 1), CKPT_CFG, path)
    save_checkpoint(opt, path)
    with pytest.raises(CheckpointError):
        resume(_problem(3, 1), RunConfig(seed=6, max_inner_steps=40, max_total_evals=6000), path)
