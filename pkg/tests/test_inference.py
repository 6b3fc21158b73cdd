from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import logsumexp

from maxstab.inference import (
    ALPHA_HI,
    ALPHA_LO,
    BiasSummary,
    FitResult,
    LikelihoodData,
    LikelihoodKind,
    bias_summary,
    fit,
    log_likelihood,
    tree_sum,
)
from maxstab.logistic import (
    LogisticModel,
    log_full_density,
    log_second_order_density,
    log_st_density,
)
from maxstab.partitions import canonicalize, enumerate_partitions
from maxstab.samplers import Dataset, MaxBlockObservation, RngStream, sample_dataset

ST = LikelihoodKind.STEPHENSON_TAWN
SO = LikelihoodKind.SECOND_ORDER
FULL = LikelihoodKind.FULL


def make_synthetic(maxima_rows, partitions, n):
    d = len(maxima_rows[0])
    obs = tuple(
        MaxBlockObservation(
            maxima=np.asarray(row, dtype=float),
            partition=p,
            n=n,
            d=d,
        )
        for row, p in zip(maxima_rows, partitions)
    )
    return Dataset(observations=obs, n=n, d=d)


def test_kind_parse():
    assert LikelihoodKind.parse("second-order") is SO
    assert LikelihoodKind.parse("stephenson-tawn") is ST
    with pytest.raises(ValueError):
        LikelihoodKind.parse("pairwise")


def test_tree_sum_matches_plain_sum_and_is_permutation_exact():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=1001) * rng.lognormal(size=1001)
    assert tree_sum(vals) == pytest.approx(float(vals.sum()), rel=1e-12)
    shuffled = vals.copy()
    rng.shuffle(shuffled)
    assert tree_sum(vals) == tree_sum(shuffled)  # bit-exact
    assert tree_sum(np.array([1.0, -np.inf])) == -np.inf


def test_single_observation_reduces_to_density_ops():
    rng = RngStream(21)
    ds = sample_dataset(1, 40, 4, "logistic", 0.6, rng)
    obs = ds.observations[0]
    for alpha in (0.3, 0.85):
        model = LogisticModel(alpha)
        assert log_likelihood(ds, alpha, ST) == pytest.approx(
            log_st_density(obs.maxima, obs.partition, model), rel=1e-11
        )
        assert log_likelihood(ds, alpha, SO) == pytest.approx(
            log_second_order_density(obs.maxima, obs.partition, model, 40), rel=1e-11
        )
        assert log_likelihood(ds, alpha, FULL) == pytest.approx(
            log_full_density(obs.maxima, model), rel=1e-11
        )


def test_full_equals_logsumexp_of_occurrence_terms_at_d3():
    ds = sample_dataset(6, 50, 3, "logistic", 0.5, RngStream(22))
    alpha = 0.62
    model = LogisticModel(alpha)
    expected = sum(
        logsumexp(
            [log_st_density(o.maxima, p, model) for p in enumerate_partitions(3)]
        )
        for o in ds.observations
    )
    assert log_likelihood(ds, alpha, FULL) == pytest.approx(expected, rel=1e-11)


def test_second_order_tends_to_st_per_observation():
    # same maxima and partitions, block size pushed to 1e9
    sampled = sample_dataset(5, 100, 5, "logistic", 0.7, RngStream(23))
    rows = [o.maxima for o in sampled.observations]
    parts = [o.partition for o in sampled.observations]
    ds = make_synthetic(rows, parts, 10**9)
    data = LikelihoodData.from_dataset(ds)
    for alpha in (0.4, 0.9):
        per_st = data.per_observation(alpha, ST)
        per_so = data.per_observation(alpha, SO)
        assert np.all(np.abs(per_so - per_st) < 1e-6)


def test_kind_constraints():
    ds = sample_dataset(3, 10, 5, "logistic", 0.5, RngStream(24))
    with pytest.raises(ValueError, match="n > d"):
        log_likelihood(ds, 0.5, SO)  # n=10 = d(d-1)/2
    with pytest.raises(ValueError):
        log_likelihood(ds, 1.5, ST)


def test_likelihood_surface_finite_on_search_interval():
    ds = sample_dataset(40, 60, 10, "logistic", 0.4, RngStream(25))
    grid = np.linspace(ALPHA_LO, ALPHA_HI, 400)
    for kind in (ST, SO):
        vals = np.array([log_likelihood(ds, a, kind) for a in grid])
        assert np.all(np.isfinite(vals))  # dense grid, no NaN / -inf
    # second-order per-observation densities stay strictly positive
    data = LikelihoodData.from_dataset(ds)
    for alpha in (ALPHA_LO, 0.25, 0.75, ALPHA_HI):
        assert np.all(data.per_observation(alpha, SO) > -np.inf)


def test_fit_consistency_d2():
    ds = sample_dataset(10_000, 100, 2, "logistic", 0.5, RngStream(26))
    res = fit(ds, ST)
    assert res.converged
    assert not res.boundary
    assert res.evaluations <= 200
    assert abs(res.alpha_hat - 0.5) < 0.02


def test_fit_boundary_flag_on_independence_like_data():
    rng = np.random.default_rng(5150)
    d, n, m = 2, 200, 400
    singles = canonicalize([(1,), (2,)], 2)
    rows = 1.0 / rng.standard_exponential((m, d))  # i.i.d. Frechet
    ds = make_synthetic(rows, [singles] * m, n)
    res = fit(ds, ST)
    assert res.converged
    assert res.boundary
    assert res.alpha_hat > ALPHA_HI - 1e-4


def test_fit_permutation_invariance_is_bit_exact():
    ds = sample_dataset(200, 50, 6, "logistic", 0.7, RngStream(27))
    perm = np.random.default_rng(1).permutation(len(ds))
    shuffled = Dataset(
        observations=tuple(ds.observations[i] for i in perm),
        n=ds.n,
        d=ds.d,
        model=ds.model,
        alpha_true=ds.alpha_true,
    )
    r1, r2 = fit(ds, SO), fit(shuffled, SO)
    assert r1.alpha_hat == r2.alpha_hat  # bit-exact
    assert r1.loglik_at_max == r2.loglik_at_max


def test_st_and_full_fits_agree_statistically_at_large_block_size():
    # the occurrence partition carries real information about alpha, so the
    # two estimates differ by an O(1/sqrt(num_obs)) random amount, not by
    # optimizer tolerance; with 2000 observations both should sit close to
    # the truth and to each other
    ds = sample_dataset(2000, 5000, 2, "logistic", 0.6, RngStream(28))
    r_st = fit(ds, ST)
    r_full = fit(ds, FULL)
    assert abs(r_st.alpha_hat - 0.6) < 0.03
    assert abs(r_full.alpha_hat - 0.6) < 0.03
    assert abs(r_st.alpha_hat - r_full.alpha_hat) < 0.05


def test_fit_result_csv_row():
    res = FitResult(
        alpha_hat=0.5,
        loglik_at_max=-12.25,
        evaluations=31,
        converged=True,
        kind=SO,
        boundary=False,
    )
    assert FitResult.CSV_HEADER.startswith("kind,alpha_hat")
    assert res.csv_row() == "second-order,0.5,-12.25,31,True,False"


def test_bias_summary_exact_cases():
    with pytest.raises(ValueError):
        bias_summary([0.5], 0.5)
    b = bias_summary([0.5] * 10, 0.5)
    assert b.mean_bias == 0.0 and not b.significant_5pct
    eps = 0.01
    est = [0.5 + eps, 0.5 - eps] * 8
    b = bias_summary(est, 0.5)
    m = len(est)
    assert b.mean_bias == pytest.approx(0.0, abs=1e-15)
    assert b.sample_sd == pytest.approx(eps * math.sqrt(m / (m - 1)), rel=1e-12)
    assert not b.significant_5pct
    assert b.replications == m


def test_bias_summary_detects_clear_bias():
    rng = np.random.default_rng(9)
    est = 0.48 + 0.005 * rng.standard_normal(100)
    b = bias_summary(est, 0.5)
    assert b.significant_5pct
    assert b.t_statistic == pytest.approx(
        b.mean_bias / (b.sample_sd / math.sqrt(100)), rel=1e-12
    )
    assert b.mean_bias < -0.015
