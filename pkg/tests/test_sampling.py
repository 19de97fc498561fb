import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import qmc

from scoutnd.sampling import (
    MAX_SOBOL_DIM,
    SampleBatch,
    Scheme,
    draw_batch,
    draw_pseudo,
    draw_sobol,
    read_batch_csv,
    star_discrepancy_proxy,
    write_batch_csv,
)


def test_pseudo_examples():
    a = draw_pseudo(3, 50, 123)
    np.testing.assert_array_equal(a, draw_pseudo(3, 50, 123))
    assert not np.array_equal(a, draw_pseudo(3, 50, 124))
    m = draw_pseudo(1, 100_000, 5).mean()
    assert 0.494 <= m <= 0.506


def test_sobol_first_points():
    pts = draw_sobol(2, 4, 0, scramble=False)
    np.testing.assert_array_equal(pts, [[0, 0], [0.5, 0.5], [0.75, 0.25], [0.25, 0.75]])


def test_sobol_matches_reference_implementation():
    ref = qmc.Sobol(d=MAX_SOBOL_DIM, scramble=False, bits=32).random(4096)
    np.testing.assert_array_equal(draw_sobol(MAX_SOBOL_DIM, 4096, 0, scramble=False), ref)


@pytest.mark.parametrize("k", [1, 4, 8, 10])
def test_sobol_dyadic_net(k):
    pts = np.sort(draw_sobol(1, 2**k, 0, scramble=False)[:, 0])
    cells = np.floor(pts * 2**k).astype(int)
    np.testing.assert_array_equal(cells, np.arange(2**k))


@pytest.mark.parametrize("k", [3, 7])
def test_scrambled_sobol_keeps_net_property(k):
    for seed in range(3):
        pts = draw_sobol(3, 2**k, seed)
        for j in range(3):
            cells = np.sort(np.floor(pts[:, j] * 2**k).astype(int))
            np.testing.assert_array_equal(cells, np.arange(2**k))


def test_scrambled_determinism_and_range():
    a = draw_sobol(5, 100, 42)
    np.testing.assert_array_equal(a, draw_sobol(5, 100, 42))
    assert not np.array_equal(a, draw_sobol(5, 100, 43))
    assert a.min() >= 0 and a.max() < 1


def test_sobol_dimension_limit():
    with pytest.raises(ValueError):
        draw_sobol(MAX_SOBOL_DIM + 1, 4, 0)
    assert MAX_SOBOL_DIM >= 64


def test_discrepancy_examples():
    assert star_discrepancy_proxy(np.zeros((1, 3)), np.ones((1, 3))) == 0.0
    # degenerate box of zero volume holds no points
    assert star_discrepancy_proxy(np.full((4, 2), 0.5), np.zeros((1, 2))) == 0.0


def test_sobol_beats_pseudo_on_discrepancy():
    rng = np.random.default_rng(0)
    boxes = rng.random((500, 2))
    n = 2**10
    sob = [star_discrepancy_proxy(draw_sobol(2, n, s), boxes) for s in range(20)]
    pse = [star_discrepancy_proxy(draw_pseudo(2, n, s), boxes) for s in range(20)]
    assert np.median(sob) < np.median(pse)


def test_rqmc_unbiased():
    # separable polynomial with known integral: prod_j (1 + (x_j - 1/2) + 3 (x_j^2 - 1/3)) has mean 1
    d, n = 4, 256

    def f(u):
        return np.prod(1 + (u - 0.5) + 3 * (u**2 - 1 / 3), axis=1)

    means = np.array([f(draw_sobol(d, n, s)).mean() for s in range(100)])
    se = means.std(ddof=1) / np.sqrt(means.size)
    assert abs(means.mean() - 1.0) <= 3 * se


@pytest.mark.parametrize("d", [8, 32])
def test_qmc_variance_below_pseudo_on_sphere(d):
    from scoutnd.policy import norm_ppf

    def est(u):
        return (norm_ppf(u) ** 2).sum(axis=1).mean()

    q = [est(draw_sobol(d, 128, s)) for s in range(50)]
    p = [est(draw_pseudo(d, 128, s)) for s in range(50)]
    assert np.var(q, ddof=1) < np.var(p, ddof=1)


def test_batch_layout_and_validation():
    b = draw_batch(3, 1, 16, 9, Scheme.QMC)
    assert b.u_design.shape == (16, 3) and b.u_noise.shape == (16, 1) and b.size == 16
    np.testing.assert_array_equal(b.joint(), draw_sobol(4, 16, 9))
    with pytest.raises(ValueError):
        SampleBatch(np.array([[1.0]]), np.zeros((1, 0)), Scheme.PSEUDO, 0)
    with pytest.raises(ValueError):
        SampleBatch(np.zeros((2, 1)), np.zeros((3, 0)), Scheme.PSEUDO, 0)


@given(st.integers(1, 5), st.integers(0, 2), st.integers(1, 40), st.integers(0, 2**64 - 1),
       st.sampled_from(list(Scheme)))
def test_batch_csv_round_trip(tmp_path_factory, d, nd, S, seed, scheme):
    b = draw_batch(d, nd, S, seed, scheme)
    path = tmp_path_factory.mktemp("b") / "batch.csv"
    write_batch_csv(b, path)
    back = read_batch_csv(path, d)
    assert back.scheme is b.scheme and back.seed == b.seed
    np.testing.assert_array_equal(back.u_design, b.u_design)
    np.testing.assert_array_equal(back.u_noise, b.u_noise)
