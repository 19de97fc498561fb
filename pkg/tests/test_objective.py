import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scoutnd.benchmarks import SphereCase, SphereConfig, make_sphere
from scoutnd.objective import (
    EvaluationError,
    PenaltySchedule,
    ProblemSpec,
    augmented_objective,
    default_schedule,
    evaluate,
    evaluate_batch,
    geometric_schedule,
)

finite = st.floats(-1e3, 1e3)


def test_augmented_examples():
    assert augmented_objective(3.0, [-1.0], [10.0]) == 3.0
    assert augmented_objective(1.0, [0.5], [2.0]) == 2.0
    # case 1 sphere at the origin: f = 0, C = 1
    p = make_sphere(SphereConfig(d=2, case=SphereCase.BOUNDARY))
    f, c = evaluate(p, 2, [0.0, 0.0], [0.5])
    assert augmented_objective(f, c, [10.0]) == 10.0


def test_augmented_rejects_nan_and_length():
    with pytest.raises(ValueError):
        augmented_objective(float("nan"), [0.0], [1.0])
    with pytest.raises(ValueError):
        augmented_objective(1.0, [float("nan")], [1.0])
    with pytest.raises(ValueError):
        augmented_objective(1.0, [0.0, 1.0], [1.0])


@given(finite, st.lists(st.tuples(finite, st.floats(0.01, 100)), min_size=1, max_size=4), st.integers(0, 3),
       st.floats(0, 10))
def test_augmented_monotone(f, pairs, k, bump):
    C = np.array([c for c, _ in pairs])
    lam = np.array([lam for _, lam in pairs])
    base = augmented_objective(f, C, lam)
    assert base >= f
    if np.max(C) <= 0:
        assert base == f
    k %= len(pairs)
    C2, lam2 = C.copy(), lam.copy()
    C2[k] += bump
    lam2[k] += bump
    assert augmented_objective(f, C2, lam) >= base
    assert augmented_objective(f, C, lam2) >= base


def test_geometric_schedule():
    s = geometric_schedule([1.0], 10, 3)
    assert [lam.tolist() for lam in s.lambdas] == [[1.0], [10.0], [100.0]]
    assert geometric_schedule([3.0], 2, 1).lambdas[0].tolist() == [3.0]
    s = geometric_schedule([0.5, 2.0], 4, 2)
    assert [lam.tolist() for lam in s.lambdas] == [[0.5, 2.0], [2.0, 8.0]]
    with pytest.raises(ValueError):
        geometric_schedule([1.0], 1.0, 3)
    # rounds past K keep the last entry
    assert s[10].tolist() == [2.0, 8.0]


def test_schedule_validation():
    with pytest.raises(ValueError):
        PenaltySchedule(())
    with pytest.raises(ValueError):
        PenaltySchedule(([2.0], [1.0]))
    with pytest.raises(ValueError):
        PenaltySchedule(([0.0],))
    assert default_schedule(0).lambdas[0].size == 0


def test_evaluate_examples():
    p = make_sphere(SphereConfig(d=2, case=SphereCase.INTERIOR))
    f, _ = evaluate(p, 2, [1.0, 1.0], [0.5])
    assert f == 2.0
    f, _ = evaluate(p, 1, [1.05, 1.05], [0.5])
    assert f == pytest.approx(2.0, rel=1e-15)
    q = make_sphere(SphereConfig(d=3, case=SphereCase.NONE))
    _, c = evaluate(q, 2, [1.0, 2.0, 3.0], [0.3])
    assert c.shape == (0,)


def test_evaluate_deterministic_and_counted():
    p = make_sphere(SphereConfig(d=3))
    a = evaluate(p, 2, [0.1, 0.2, 0.3], [0.7])
    b = evaluate(p, 2, [0.1, 0.2, 0.3], [0.7])
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    evaluate(p, 1, [0.1, 0.2, 0.3], [0.7])
    assert p.counter.counts == [1, 2]


def test_batch_matches_scalar_path():
    p = make_sphere(SphereConfig(d=4, case=SphereCase.BOUNDARY))
    rng = np.random.default_rng(0)
    X, U = rng.normal(size=(20, 4)), rng.random((20, 1))
    for level in (1, 2):
        F, C = evaluate_batch(p, level, X, U)
        for i in range(20):
            f, c = evaluate(p, level, X[i], U[i])
            assert F[i] == pytest.approx(f, rel=1e-14)
            np.testing.assert_allclose(C[i], c, rtol=1e-14, atol=1e-15)


def _flaky_problem(workers):
    def fn(x, b):
        if x[0] > 0.5:
            return float("nan"), np.zeros(0)
        return float(x[0]), np.zeros(0)
    return ProblemSpec(dim=1, levels=[fn], workers=workers)


@pytest.mark.parametrize("workers", [1, 4])
def test_nan_surfaces_with_index(workers):
    p = _flaky_problem(workers)
    X = np.array([[0.0], [0.1], [0.9], [0.2]])
    with pytest.raises(EvaluationError) as info:
        evaluate_batch(p, 1, X, np.zeros((4, 0)))
    assert info.value.index == 2 and info.value.level == 1
    assert "index 2" in str(info.value) or "2" in str(info.value)


def test_concurrent_counter():
    calls = []
    lock = threading.Lock()

    def fn(x, b):
        with lock:
            calls.append(float(x[0]))
        return float(x[0]) ** 2, np.zeros(0)

    p = ProblemSpec(dim=1, levels=[fn], workers=8)
    X = np.arange(200, dtype=float)[:, None]
    F, _ = evaluate_batch(p, 1, X, np.zeros((200, 0)))
    np.testing.assert_array_equal(F, X[:, 0] ** 2)
    assert p.counter.counts == [200] and len(calls) == 200


def test_problem_validation():
    fn = lambda x, b: (0.0, np.zeros(0))  # noqa: E731
    with pytest.raises(ValueError):
        ProblemSpec(dim=1, levels=[])
    with pytest.raises(ValueError):
        ProblemSpec(dim=1, levels=[fn, fn], costs=[1.0, 1.0])
    with pytest.raises(ValueError):
        ProblemSpec(dim=0, levels=[fn])
    p = ProblemSpec(dim=1, levels=[fn])
    with pytest.raises(ValueError):
        evaluate(p, 2, [0.0], [])
