"""The max-stable logistic dependence model and its density evaluators.

The joint distribution function is exp(-V(x)) with exponent function
V(x) = (sum_i x_i^(-1/alpha))^alpha on standard Frechet margins, alpha in
(0, 1]: alpha -> 0 is complete dependence, alpha = 1 independence.

Three log densities are provided for a block-maxima observation:

* ``log_st_density`` -- the occurrence-time (Stephenson-Tawn) density
  e^{-V} prod_{B in p} (-V_B), using only the observed partition's term;
* ``log_second_order_density`` -- the finite-block correction that deflates
  the leading term by 1 - m(m-1)/(2n) and adds every one-block-split
  refinement weighted 1/n;
* ``log_full_density`` -- the exact density, summing the occurrence-time
  term over all partitions of {1, ..., d}.

Subscripts denote partial derivatives: V_B is the mixed partial of V in the
coordinates of block B, and every -V_B > 0 for alpha < 1.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import comb, exp, log
from typing import Iterable

import numpy as np
from scipy.special import logsumexp

from .partitions import (
    ENUMERATION_CAP,
    Partition,
    _integer_partitions,
    _set_partition_count,
    enumerate_partitions,
    split_block_refinements,
)

__all__ = [
    "MaxStableModel",
    "LogisticModel",
    "log_st_density",
    "log_second_order_density",
    "log_full_density",
    "return_level",
]


def _check_vector(x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"expected a 1-d observation vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("observation vector must be finite and strictly positive")
    return arr


class MaxStableModel(ABC):
    """Dependence model interface used by the likelihood layer.

    Implementations expose the exponent function and the log of its negated
    subset partial derivatives; the density evaluators below are written
    against this interface only.
    """

    @abstractmethod
    def exponent(self, x: np.ndarray) -> float:
        """V(x), the exponent function at x."""

    @abstractmethod
    def log_neg_partial(self, x: np.ndarray, subset: Iterable[int]) -> float:
        """log(-V_S(x)) for a non-empty subset S of {1, ..., d} (1-based)."""


@dataclass(frozen=True)
class LogisticModel(MaxStableModel):
    """Logistic exponent V(x) = (sum_i x_i^(-1/alpha))^alpha, alpha in (0, 1]."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    def exponent(self, x: np.ndarray) -> float:
        arr = _check_vector(x)
        return exp(self.alpha * logsumexp(-np.log(arr) / self.alpha))

    def log_neg_partial(self, x: np.ndarray, subset: Iterable[int]) -> float:
        """Closed form, accumulated in log space:

        -V_S = alpha^(1-s) * prod_{k=1}^{s-1} (k - alpha)
               * T^(alpha-s) * prod_{j in S} x_j^(-1/alpha - 1),
        T = sum_i x_i^(-1/alpha), s = |S|.

        At alpha = 1 any derivative of order s >= 2 is exactly zero, so the
        returned log is -inf; this is a legitimate degenerate value.
        """
        arr = _check_vector(x)
        idx = self._subset_indices(arr.size, subset)
        s = idx.size
        a = self.alpha
        if a == 1.0 and s >= 2:
            return -np.inf
        logx = np.log(arr)
        log_t = logsumexp(-logx / a)
        out = (1 - s) * log(a) + (a - s) * log_t
        for k in range(1, s):
            out += log(k - a)
        out += (-1.0 / a - 1.0) * float(logx[idx].sum())
        return out

    @staticmethod
    def _subset_indices(d: int, subset: Iterable[int]) -> np.ndarray:
        idx = np.asarray(sorted(set(int(j) for j in subset)), dtype=int)
        if idx.size == 0:
            raise ValueError("subset must be non-empty")
        if idx[0] < 1 or idx[-1] > d:
            raise ValueError(f"subset {idx.tolist()} outside 1..{d}")
        return idx - 1


# ----------------------------------------------------------------------
# per-observation density evaluators (model-interface route)
# ----------------------------------------------------------------------

def log_st_density(x: np.ndarray, p: Partition, model: MaxStableModel) -> float:
    """Log occurrence-time density: sum_B log(-V_B(x)) - V(x)."""
    arr = _check_vector(x)
    if p.d != arr.size:
        raise ValueError(f"partition dimension {p.d} != vector length {arr.size}")
    total = -model.exponent(arr)
    for block in p.blocks:
        total += model.log_neg_partial(arr, block)
    return total


def log_second_order_density(
    x: np.ndarray, p: Partition, model: MaxStableModel, n: int
) -> float:
    """Log finite-block density truncated after the 1/n terms.

    Sums 1 + refinement_count(p) positive terms by log-sum-exp: the leading
    term carries coefficient 1 - m(m-1)/(2n) and each one-block split carries
    1/n. Positivity of every coefficient requires n > d(d-1)/2.
    """
    arr = _check_vector(x)
    if p.d != arr.size:
        raise ValueError(f"partition dimension {p.d} != vector length {arr.size}")
    d = p.d
    if n <= d * (d - 1) // 2:
        raise ValueError(
            f"block size n={n} violates n > d(d-1)/2 = {d * (d - 1) // 2}"
        )
    m = p.size
    lead = sum(model.log_neg_partial(arr, block) for block in p.blocks)
    terms = [log(1.0 - m * (m - 1) / (2.0 * n)) + lead]
    for q in split_block_refinements(p):
        terms.append(-log(n) + sum(model.log_neg_partial(arr, b) for b in q.blocks))
    return -model.exponent(arr) + logsumexp(terms)


def log_full_density(x: np.ndarray, model: MaxStableModel) -> float:
    """Log of the exact d-dimensional density: the occurrence-time terms
    summed over all partitions of {1, ..., d} (bell_number(d) of them)."""
    arr = _check_vector(x)
    d = arr.size
    if d > ENUMERATION_CAP:
        raise ValueError(f"full density needs d <= {ENUMERATION_CAP}, got {d}")
    terms = [log_st_density(arr, p, model) for p in enumerate_partitions(d)]
    return float(logsumexp(terms))


def return_level(alpha_hat: float, d: int, p: float) -> float:
    """Level exceeded by at least one of d components with probability p:
    d^alpha_hat / (-log(1 - p))."""
    if not 0.0 < alpha_hat <= 1.0:
        raise ValueError(f"alpha_hat must lie in (0, 1], got {alpha_hat}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"exceedance probability must lie in (0, 1), got {p}")
    return d**alpha_hat / (-np.log1p(-p))


# ----------------------------------------------------------------------
# batched evaluators
#
# For the logistic model the density factorizes through block sizes: with
# T = sum_i x_i^(-1/alpha) and s = |B|,
#
#   log(-V_B) = g(s) + (alpha - s) log T + (-1/alpha - 1) sum_{j in B} log x_j
#   g(s) = (1 - s) log alpha + sum_{k=1}^{s-1} log(k - alpha)
#
# so a whole dataset's occurrence-time log densities reduce to a log-sum-exp
# per row plus table lookups keyed by block-size counts. Replacing one block
# D by a split (A, B) multiplies the block product by alpha * T^alpha *
# exp(h(|A|) + h(|B|) - h(|D|)) with h(s) = sum_{k<s} log(k - alpha), which
# collapses the refinement sum of the second-order density into a per-size
# table as well. These paths are exercised against the per-observation
# evaluators above in the test suite.
# ----------------------------------------------------------------------

def _h_table(alpha: float, d: int) -> np.ndarray:
    """h[s] = sum_{k=1}^{s-1} log(k - alpha) for s = 0..d (h[0] = h[1] = 0)."""
    h = np.zeros(d + 1)
    if d >= 2:
        with np.errstate(divide="ignore"):
            h[2:] = np.cumsum(np.log(np.arange(1, d) - alpha))
    return h


def _g_table(alpha: float, d: int) -> np.ndarray:
    """g[s] = (1 - s) log alpha + h[s]; the size-dependent factor of log(-V_B)."""
    s = np.arange(d + 1)
    g = (1 - s) * log(alpha) + _h_table(alpha, d)
    g[0] = 0.0
    return g


def _q_table(alpha: float, d: int) -> np.ndarray:
    """q[s] = sum over splits of a size-s block into parts (a, s-a) of
    binomial weight times exp(h(a) + h(s-a) - h(s)); q[0] = q[1] = 0."""
    h = _h_table(alpha, d)
    q = np.zeros(d + 1)
    for s in range(2, d + 1):
        tot = 0.0
        for a in range(1, s // 2 + 1):
            w = comb(s, a)
            if 2 * a == s:
                w //= 2
            tot += w * exp(h[a] + h[s - a] - h[s])
        q[s] = tot
    return q


def _batch_core(alpha: float, logx: np.ndarray):
    log_t = logsumexp(-logx / alpha, axis=1)
    v = np.exp(alpha * log_t)
    rowsum = logx.sum(axis=1)
    return log_t, v, rowsum


def st_log_density_batch(
    alpha: float, logx: np.ndarray, sizes: np.ndarray, size_counts: np.ndarray
) -> np.ndarray:
    """Occurrence-time log density for N observations at once.

    logx: (N, d) log maxima; sizes: (N,) partition sizes m; size_counts:
    (N, d+1) with size_counts[i, s] = number of size-s blocks in observation i.
    """
    d = logx.shape[1]
    log_t, v, rowsum = _batch_core(alpha, logx)
    if alpha == 1.0:
        base = -v - 2.0 * rowsum
        nonsingleton = size_counts[:, 2:].sum(axis=1) > 0
        return np.where(nonsingleton, -np.inf, base)
    g = _g_table(alpha, d)
    return (
        -v
        + (alpha * sizes - d) * log_t
        + (-1.0 / alpha - 1.0) * rowsum
        + size_counts @ g
    )


def second_order_log_density_batch(
    alpha: float,
    logx: np.ndarray,
    sizes: np.ndarray,
    size_counts: np.ndarray,
    n: int,
) -> np.ndarray:
    """Second-order log density for N observations at once (see st batch)."""
    d = logx.shape[1]
    if n <= d * (d - 1) // 2:
        raise ValueError(
            f"block size n={n} violates n > d(d-1)/2 = {d * (d - 1) // 2}"
        )
    lead = st_log_density_batch(alpha, logx, sizes, size_counts)
    coef = 1.0 - sizes * (sizes - 1) / (2.0 * n)
    if alpha == 1.0:
        # every refinement keeps a non-singleton block or splits one into
        # singletons with a zero factor, so only the deflated lead survives
        return lead + np.log(coef)
    _, v, _ = _batch_core(alpha, logx)
    q = _q_table(alpha, d)
    return lead + np.log(coef + alpha * v * (size_counts @ q) / n)


def full_log_density_batch(alpha: float, logx: np.ndarray) -> np.ndarray:
    """Exact log density for N observations at once.

    Only the block-size multiset of a partition enters the logistic density,
    so the sum over all bell_number(d) partitions groups into one term per
    integer partition of d, weighted by the number of set partitions with
    those block sizes.
    """
    d = logx.shape[1]
    if d > ENUMERATION_CAP:
        raise ValueError(f"full density needs d <= {ENUMERATION_CAP}, got {d}")
    log_t, v, rowsum = _batch_core(alpha, logx)
    if alpha == 1.0:
        return -v - 2.0 * rowsum
    g = _g_table(alpha, d)
    offsets = []
    for sizes in _integer_partitions(d):
        m = len(sizes)
        offsets.append(
            log(_set_partition_count(sizes))
            + sum(g[s] for s in sizes)
            + alpha * m * log_t
        )
    pooled = logsumexp(np.stack(offsets, axis=1), axis=1)
    return -v - d * log_t + (-1.0 / alpha - 1.0) * rowsum + pooled
