from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from maxstab.logistic import LogisticModel
from maxstab.partitions import canonicalize, ratio_exact
from maxstab.samplers import (
    Dataset,
    MaxBlockObservation,
    RngStream,
    read_dataset_csv,
    sample_dataset,
    sample_logistic_vector,
    sample_max_block,
    sample_opc_vector,
    sample_positive_stable,
    write_dataset_csv,
)


def opc_corner(d: int, alpha: float) -> float:
    """F(1,...,1) for the outer power Clayton model: (1 + d^alpha (e-1))^(-1)."""
    return 1.0 / (1.0 + d**alpha * (math.e - 1.0))


# ----------------------------------------------------------------------
# stream contract
# ----------------------------------------------------------------------

def test_stream_determinism_and_children():
    a = RngStream(123).child(4, 5)
    b = RngStream(123).child(4).child(5)
    assert a == b
    x = a.generator().standard_normal(8)
    y = b.generator().standard_normal(8)
    assert np.array_equal(x, y)
    z = RngStream(123).child(4, 6).generator().standard_normal(8)
    assert not np.array_equal(x, z)


# ----------------------------------------------------------------------
# positive stable
# ----------------------------------------------------------------------

def test_stable_degenerate_at_one():
    assert sample_positive_stable(1.0, RngStream(0)) == 1.0
    with pytest.raises(ValueError):
        sample_positive_stable(1.5, RngStream(0))
    with pytest.raises(ValueError):
        sample_positive_stable(0.0, RngStream(0))


def test_stable_laplace_transform():
    draws = sample_positive_stable(0.5, RngStream(77).child(1), size=100_000)
    probe = np.exp(-draws)
    se = probe.std(ddof=1) / math.sqrt(probe.size)
    assert abs(probe.mean() - math.exp(-1.0)) < 3 * se


def test_stable_half_matches_levy_law():
    draws = sample_positive_stable(0.5, RngStream(78).child(2), size=10_000)
    # exp(-sqrt(t)) is the transform of a Levy(0, 1/2) variable
    res = stats.kstest(draws, "levy", args=(0.0, 0.5))
    assert res.pvalue > 0.01


# ----------------------------------------------------------------------
# logistic vectors
# ----------------------------------------------------------------------

def test_logistic_independence_margins_and_correlation():
    rng = RngStream(901)
    draws = np.stack([sample_logistic_vector(2, 1.0, rng.child(i)) for i in range(10_000)])
    for j in range(2):
        res = stats.kstest(draws[:, j], lambda v: np.exp(-1.0 / v))
        assert res.pvalue > 0.01
    rho = stats.spearmanr(draws[:, 0], draws[:, 1]).statistic
    assert abs(rho) < 0.03


def test_logistic_corner_probability():
    rng = RngStream(902)
    gen_stream = rng.child(0)
    # batched equivalent of 1e5 single-vector draws
    draws = np.stack(
        [sample_logistic_vector(2, 0.5, gen_stream.child(i)) for i in range(50_000)]
    )
    hits = np.mean(np.all(draws <= 1.0, axis=1))
    target = math.exp(-LogisticModel(0.5).exponent(np.ones(2)))
    se = math.sqrt(target * (1 - target) / draws.shape[0])
    assert target == pytest.approx(math.exp(-math.sqrt(2.0)), rel=1e-12)
    assert abs(hits - target) < 3 * se


def test_logistic_max_stability_of_rescaled_maxima():
    # componentwise max of n draws, rescaled by 1/n, satisfies the same
    # corner-CDF check as a single draw
    n, d, alpha = 20, 2, 0.5
    rng = RngStream(903)
    hits = []
    for i in range(20_000):
        obs = sample_max_block(n, d, "logistic", alpha, rng.child(i))
        hits.append(np.all(obs.maxima <= 1.0))
    p_hat = np.mean(hits)
    target = math.exp(-LogisticModel(alpha).exponent(np.ones(d)))
    se = math.sqrt(target * (1 - target) / len(hits))
    assert abs(p_hat - target) < 3 * se


# ----------------------------------------------------------------------
# outer power Clayton vectors
# ----------------------------------------------------------------------

def test_opc_margins_are_frechet():
    rng = RngStream(904)
    draws = np.stack([sample_opc_vector(6, 0.4, rng.child(i)) for i in range(10_000)])
    res = stats.kstest(draws[:, 3], lambda v: np.exp(-1.0 / v))
    assert res.pvalue > 0.01


def test_opc_corner_probability():
    rng = RngStream(905)
    draws = np.stack([sample_opc_vector(2, 0.7, rng.child(i)) for i in range(50_000)])
    hits = np.mean(np.all(draws <= 1.0, axis=1))
    target = opc_corner(2, 0.7)
    se = math.sqrt(target * (1 - target) / draws.shape[0])
    assert abs(hits - target) < 3 * se


def test_opc_alpha_one_specializes_to_clayton_generator():
    rng = RngStream(906)
    draws = np.stack([sample_opc_vector(2, 1.0, rng.child(i)) for i in range(50_000)])
    hits = np.mean(np.all(draws <= 1.0, axis=1))
    target = opc_corner(2, 1.0)  # phi(t) = 1/(1+t): 1/(1 + 2(e-1))
    assert target == pytest.approx(1.0 / (1.0 + 2.0 * (math.e - 1.0)), rel=1e-12)
    se = math.sqrt(target * (1 - target) / draws.shape[0])
    assert abs(hits - target) < 3 * se


# ----------------------------------------------------------------------
# block maxima and occurrence partitions
# ----------------------------------------------------------------------

def test_single_vector_block_has_one_block():
    obs = sample_max_block(1, 5, "logistic", 0.6, RngStream(907))
    assert obs.partition.blocks == ((1, 2, 3, 4, 5),)
    assert obs.n == 1 and obs.d == 5


def test_all_singleton_frequency_matches_exact_ratio():
    n, d = 500, 10
    rng = RngStream(908)
    target = ratio_exact(n, d)
    singles = canonicalize([(j,) for j in range(1, d + 1)], d)
    hits = [
        sample_max_block(n, d, "logistic", 1.0, rng.child(i)).partition == singles
        for i in range(2000)
    ]
    p_hat = np.mean(hits)
    se = math.sqrt(target * (1 - target) / len(hits))
    assert abs(p_hat - target) < 3 * se


def test_unknown_model_rejected():
    with pytest.raises(ValueError, match="model tag"):
        sample_max_block(5, 2, "gaussian", 0.5, RngStream(0))


# ----------------------------------------------------------------------
# datasets
# ----------------------------------------------------------------------

def test_dataset_shape_and_determinism():
    ds1 = sample_dataset(12, 30, 4, "logistic", 0.7, RngStream(909, (3,)))
    ds2 = sample_dataset(12, 30, 4, "logistic", 0.7, RngStream(909, (3,)))
    assert len(ds1) == 12
    assert np.array_equal(ds1.maxima_matrix(), ds2.maxima_matrix())
    assert [o.partition for o in ds1.observations] == [
        o.partition for o in ds2.observations
    ]
    ds3 = sample_dataset(12, 30, 4, "logistic", 0.7, RngStream(909, (4,)))
    assert not np.array_equal(ds1.maxima_matrix(), ds3.maxima_matrix())


def test_dataset_invariants():
    obs = sample_max_block(10, 3, "logistic", 0.5, RngStream(1))
    other = sample_max_block(11, 3, "logistic", 0.5, RngStream(2))
    with pytest.raises(ValueError, match="share"):
        Dataset(observations=(obs, other), n=10, d=3)
    with pytest.raises(ValueError, match="at least one"):
        Dataset(observations=(), n=10, d=3)


def test_dataset_csv_round_trip(tmp_path):
    ds = sample_dataset(15, 25, 3, "opc", 0.4, RngStream(910))
    path = tmp_path / "ds.csv"
    write_dataset_csv(ds, str(path))
    back = read_dataset_csv(str(path))
    assert back.n == ds.n and back.d == ds.d and back.model == ds.model
    assert back.alpha_true == ds.alpha_true
    assert np.array_equal(back.maxima_matrix(), ds.maxima_matrix())  # lossless
    assert [o.partition for o in back.observations] == [
        o.partition for o in ds.observations
    ]
