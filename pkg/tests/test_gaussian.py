import json
import math

import numpy as np
import pytest
from scipy import integrate

from oracles import random_psd
from schatten_rho.gaussian import (
    GaussianMeasure,
    UnsupportedMeasureError,
    counterexample_measure,
    exp_neg_sqnorm,
    radial_exp_moment,
    sample,
    second_moment,
    sq_dist_samples,
)
from schatten_rho.operators import NotPSDError, OperatorError, SymOperator, operator_sqrt, schatten_norm
from schatten_rho.rng import BLOCK_SIZE


def test_rejects_non_psd_covariance():
    with pytest.raises(NotPSDError):
        GaussianMeasure.centered(SymOperator.diagonal([1.0, -0.5]))


def test_rejects_dim_mismatch():
    with pytest.raises(OperatorError):
        GaussianMeasure(np.zeros(3), SymOperator.identity(2))


def test_json_round_trip():
    G = GaussianMeasure([1.0, -2.0], SymOperator.dense([[2.0, 0.5], [0.5, 1.0]]))
    back = GaussianMeasure.from_json(json.loads(json.dumps(G.to_json())))
    np.testing.assert_array_equal(back.mean, G.mean)
    np.testing.assert_array_equal(back.covariance.to_dense(), G.covariance.to_dense())
    assert back.measure_id == G.measure_id


# -- sampling -----------------------------------------------------------------


def test_sample_degenerate_rows_equal_mean():
    G = GaussianMeasure.point_mass(3, at=[1.0, 2.0, 3.0])
    batch = sample(G, 50, seed=9)
    np.testing.assert_array_equal(batch.values, np.tile([1.0, 2.0, 3.0], (50, 1)))


def test_sample_unit_variance():
    G = GaussianMeasure.centered(SymOperator.identity(1))
    x = sample(G, 10**5, seed=1).values[:, 0]
    assert abs(x.var() - 1.0) <= 3 * math.sqrt(2 / 1e5)


def test_sample_counterexample_covariance():
    n = 50
    G = counterexample_measure(n)
    x = sample(G, 10**4, seed=2).values
    var = x.var(axis=0)
    # standard error of a normal sample variance is sigma^2 sqrt(2/N)
    se = 0.02 * math.sqrt(2 / 1e4)
    assert np.all(np.abs(var - 0.02) <= 5 * se)


def test_sample_dense_covariance():
    rng = np.random.default_rng(0)
    cov = random_psd(rng, 3)
    G = GaussianMeasure([1.0, 0.0, -1.0], SymOperator.dense(cov))
    x = sample(G, 10**5, seed=3).values
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.05 * np.abs(cov).max())
    np.testing.assert_allclose(x.mean(axis=0), G.mean, atol=0.05)


def test_sample_reproducible_across_workers():
    G = GaussianMeasure.centered(SymOperator.diagonal([1.0, 0.5, 0.1]))
    count = 3 * BLOCK_SIZE + 17
    a = sample(G, count, seed=42).values
    b = sample(G, count, seed=42, workers=4).values
    np.testing.assert_array_equal(a, b)


def test_sample_prefix_stable():
    G = GaussianMeasure.centered(SymOperator.identity(2))
    short = sample(G, 100, seed=5).values
    long = sample(G, 2 * BLOCK_SIZE, seed=5).values
    np.testing.assert_array_equal(short, long[:100])


def test_sample_seed_changes_values():
    G = GaussianMeasure.centered(SymOperator.identity(2))
    assert not np.array_equal(sample(G, 10, seed=1).values, sample(G, 10, seed=2).values)


def test_sample_rejects_zero_count():
    with pytest.raises(ValueError):
        sample(GaussianMeasure.point_mass(1), 0, seed=0)


def test_sample_batch_csv():
    batch = sample(GaussianMeasure.centered(SymOperator.identity(2)), 3, seed=0)
    lines = batch.to_csv().splitlines()
    assert lines[0] == "x0,x1"
    assert len(lines) == 4
    assert float(lines[1].split(",")[0]) == batch.values[0, 0]


@pytest.mark.parametrize(
    "G, center",
    [
        (counterexample_measure(20, 25), None),
        (GaussianMeasure([0.5, -1.0, 0.0], SymOperator.diagonal([0.3, 0.3, 0.0])), [0.0, 1.0, 2.0]),
        (GaussianMeasure([1.0, 2.0], SymOperator.scalar_plus_rank_one(0.2, 0.5, [1.0, 1.0])), [0.0, 0.5]),
        (GaussianMeasure([1.0, 0.0, 0.0], SymOperator.dense(random_psd(np.random.default_rng(1), 3))), None),
    ],
)
def test_sq_dist_samples_match_full_sampling(G, center):
    y = np.zeros(G.dim) if center is None else np.asarray(center)
    n = 200_000
    fast = sq_dist_samples(G, n, seed=11, center=center)
    full = np.sum((sample(G, n, seed=12).values - y) ** 2, axis=1)
    for transform in (lambda v: v, lambda v: np.exp(-v)):
        a, b = transform(fast), transform(full)
        se = math.hypot(a.std(), b.std()) / math.sqrt(n)
        assert abs(a.mean() - b.mean()) <= 5 * se + 1e-12


# -- moments and witnesses -----------------------------------------------------


def test_second_moment_examples():
    assert second_moment(GaussianMeasure.point_mass(4)) == 0.0
    for n in (1, 7, 100):
        assert second_moment(counterexample_measure(n)) == pytest.approx(1.0, abs=1e-12)
    G = GaussianMeasure([1.0, 0.0, 0.0], SymOperator.identity(3))
    assert second_moment(G) == 4.0


@pytest.mark.parametrize("seed", range(5))
def test_second_moment_equals_sqrt_hs(seed):
    rng = np.random.default_rng(seed)
    cov = SymOperator.dense(random_psd(rng, 5))
    G = GaussianMeasure(rng.normal(size=5), cov)
    want = schatten_norm(operator_sqrt(cov), 2) ** 2 + float(G.mean @ G.mean)
    assert second_moment(G) == pytest.approx(want, abs=1e-10 * max(1.0, want))


def test_counterexample_examples():
    G = counterexample_measure(1, 1)
    np.testing.assert_array_equal(G.covariance.diag, [1.0])
    np.testing.assert_array_equal(counterexample_measure(4, 4).covariance.diag, [0.25] * 4)
    diag = counterexample_measure(10, 20).covariance.diag
    np.testing.assert_array_equal(diag[:10], 0.1)
    np.testing.assert_array_equal(diag[10:], 0.0)


def test_counterexample_rejects_small_d():
    with pytest.raises(OperatorError):
        counterexample_measure(10, 5)


def test_exp_neg_sqnorm_point_mass():
    assert exp_neg_sqnorm(GaussianMeasure.point_mass(3)) == 1.0


def test_exp_neg_sqnorm_quadrature_oracle():
    G = GaussianMeasure.centered(SymOperator.identity(1))
    val, _ = integrate.quad(lambda x: math.exp(-x * x) * math.exp(-x * x / 2) / math.sqrt(2 * math.pi), -np.inf, np.inf)
    assert exp_neg_sqnorm(G) == pytest.approx(val, abs=1e-12)
    assert val == pytest.approx(3**-0.5, abs=1e-12)


def test_exp_neg_sqnorm_counterexample():
    assert exp_neg_sqnorm(counterexample_measure(100)) == pytest.approx(1.02**-50, abs=1e-12)
    # 1.02^-50 = 0.371527..., tending to 1/e from above
    assert exp_neg_sqnorm(counterexample_measure(10**6)) == pytest.approx(math.exp(-1), abs=1e-6)


def test_exp_neg_sqnorm_monte_carlo():
    G = counterexample_measure(100)
    v = np.exp(-sq_dist_samples(G, 10**6, seed=7))
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - exp_neg_sqnorm(G)) <= 3 * se


def test_exp_neg_sqnorm_rejects_shifted():
    with pytest.raises(UnsupportedMeasureError):
        exp_neg_sqnorm(GaussianMeasure([1.0], SymOperator.identity(1)))


@pytest.mark.parametrize("seed", range(10))
def test_exp_neg_sqnorm_decreases_with_psd_increment(seed):
    rng = np.random.default_rng(seed)
    base = random_psd(rng, 4)
    inc = random_psd(rng, 4, rank=1)
    small = exp_neg_sqnorm(GaussianMeasure.centered(SymOperator.dense(base)))
    big = exp_neg_sqnorm(GaussianMeasure.centered(SymOperator.dense(base + inc)))
    assert big < small


@pytest.mark.parametrize(
    "G, center, s",
    [
        (GaussianMeasure([0.3, -0.2], SymOperator.dense([[1.0, 0.4], [0.4, 0.5]])), [1.0, 0.0], 0.7),
        (GaussianMeasure.centered(SymOperator.scalar_plus_rank_one(0.1, 0.2, [1.0, -1.0, 2.0])), [0.5, 0.5, 0.0], 2.0),
        (counterexample_measure(3, 6), np.full(6, 0.2), 0.25),
    ],
)
def test_radial_exp_moment_monte_carlo(G, center, s):
    x = sample(G, 10**5, seed=13).values
    v = np.exp(-s * np.sum((x - np.asarray(center)) ** 2, axis=1))
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - radial_exp_moment(G, s, center)) <= 4 * se


def test_radial_exp_moment_one_dim_quadrature():
    mu, lam, y, s = 0.4, 2.0, -1.0, 0.3
    G = GaussianMeasure([mu], SymOperator.diagonal([lam]))

    def integrand(x):
        return math.exp(-s * (x - y) ** 2) * math.exp(-((x - mu) ** 2) / (2 * lam)) / math.sqrt(2 * math.pi * lam)

    val, _ = integrate.quad(integrand, -np.inf, np.inf)
    assert radial_exp_moment(G, s, [y]) == pytest.approx(val, abs=1e-12)
