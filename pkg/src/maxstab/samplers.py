"""Seeded random generation: logistic max-stable vectors, outer power Clayton
vectors, and block-maxima observations with their occurrence partitions.

Both samplers are frailty constructions driven by a positive stable variate S
with Laplace transform exp(-t^alpha):

* logistic: X_j = (S / E_j)^alpha with E_j i.i.d. unit exponential, giving
  joint CDF exp(-V(x)) exactly;
* outer power Clayton: mix W = S * E0^(1/alpha) (Laplace transform
  (1 + t^alpha)^(-1)), set U_j = (1 + (E_j/W)^alpha)^(-1) and map the uniform
  U_j to standard Frechet.

Every sampler is a pure function of its parameters and an RngStream, so runs
replay bit-exactly; distinct stream paths give independent draws.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import pi

import numpy as np

from .partitions import Partition, occurrence_partition

# alpha above this is treated as exact independence: the stable draw is
# skipped, avoiding the blow-up of the stable generator as alpha -> 1
INDEPENDENCE_CUTOFF = 0.999

MODEL_TAGS = ("logistic", "opc")

__all__ = [
    "INDEPENDENCE_CUTOFF",
    "MODEL_TAGS",
    "RngStream",
    "MaxBlockObservation",
    "Dataset",
    "sample_positive_stable",
    "sample_logistic_vector",
    "sample_opc_vector",
    "sample_max_block",
    "sample_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
]


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: (seed, path) fully determine the output.

    Children extend the path, so task (r, i) of a study can own the stream
    base.child(r).child(i) and replay identically under any scheduling.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=self.path)
        )


@dataclass(frozen=True, eq=False)
class MaxBlockObservation:
    """One scaled componentwise maximum M_n/n with its occurrence partition."""

    maxima: np.ndarray
    partition: Partition
    n: int
    d: int

    def __post_init__(self) -> None:
        if self.maxima.shape != (self.d,):
            raise ValueError("maxima length does not match dimension")
        if not np.all(np.isfinite(self.maxima)) or np.any(self.maxima <= 0):
            raise ValueError("maxima must be finite and positive")
        if self.partition.d != self.d:
            raise ValueError("partition dimension does not match observation")
        if self.partition.size > min(self.n, self.d):
            raise ValueError("partition has more blocks than min(n, d)")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Independent block-maxima observations sharing block size and dimension."""

    observations: tuple[MaxBlockObservation, ...]
    n: int
    d: int
    model: str = "logistic"
    alpha_true: float | None = None

    def __post_init__(self) -> None:
        if not self.observations:
            raise ValueError("dataset must contain at least one observation")
        for obs in self.observations:
            if obs.n != self.n or obs.d != self.d:
                raise ValueError("all observations must share n and d")

    def __len__(self) -> int:
        return len(self.observations)

    def maxima_matrix(self) -> np.ndarray:
        return np.stack([obs.maxima for obs in self.observations])


# ----------------------------------------------------------------------
# positive stable variates
# ----------------------------------------------------------------------

def _log_positive_stable(alpha: float, gen: np.random.Generator, size) -> np.ndarray:
    """log S for S positive alpha-stable with E[exp(-tS)] = exp(-t^alpha).

    Chambers-Mallows-Stuck construction specialised to the one-sided case:
    with U uniform on (0, pi) and W unit exponential,
    S = sin(alpha U) / sin(U)^(1/alpha) * (sin((1-alpha) U) / W)^((1-alpha)/alpha).
    Working on the log scale keeps small-alpha draws inside float range.
    """
    u = gen.uniform(0.0, pi, size)
    w = gen.standard_exponential(size)
    return (
        np.log(np.sin(alpha * u))
        - np.log(np.sin(u)) / alpha
        + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * u)) - np.log(w))
    )


def sample_positive_stable(alpha: float, rng: RngStream, size: int | None = None):
    """Positive stable draw(s) with Laplace transform exp(-t^alpha).

    alpha = 1 is the degenerate point mass at 1.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    m = 1 if size is None else int(size)
    if alpha == 1.0:
        out = np.ones(m)
    else:
        out = np.exp(_log_positive_stable(alpha, rng.generator(), m))
    return float(out[0]) if size is None else out


def _log_frailty(model: str, alpha: float, gen: np.random.Generator, size) -> np.ndarray:
    """Log mixing weights, one per vector of a block: log S (logistic) or
    log W (opc). Accepts scalar or tuple shapes.

    For alpha at or above the independence cutoff the logistic mix is the
    constant 1 and no stable draws are consumed.
    """
    if model == "logistic":
        if alpha >= INDEPENDENCE_CUTOFF:
            return np.zeros(size)
        return _log_positive_stable(alpha, gen, size)
    if model == "opc":
        if alpha >= INDEPENDENCE_CUTOFF:
            log_s = np.zeros(size)
        else:
            log_s = _log_positive_stable(alpha, gen, size)
        return log_s + np.log(gen.standard_exponential(size)) / alpha
    raise ValueError(f"unknown model tag {model!r}; expected one of {MODEL_TAGS}")


# ----------------------------------------------------------------------
# single-vector samplers
# ----------------------------------------------------------------------

def _logistic_log_block(d: int, alpha: float, gen: np.random.Generator, n: int) -> np.ndarray:
    """(n, d) matrix of log X for n i.i.d. logistic vectors."""
    log_s = _log_frailty("logistic", alpha, gen, n)
    log_e = np.log(gen.standard_exponential((n, d)))
    return alpha * (log_s[:, None] - log_e)


def _opc_block(d: int, alpha: float, gen: np.random.Generator, n: int) -> np.ndarray:
    """(n, d) matrix of X for n i.i.d. outer power Clayton vectors.

    X_j = -1/log U_j with U_j = (1 + t^alpha)^(-1), t = E_j / W; on the log
    scale -log U_j = log(1 + t^alpha) = logaddexp(0, alpha log t).
    """
    log_w = _log_frailty("opc", alpha, gen, n)
    log_e = np.log(gen.standard_exponential((n, d)))
    z = alpha * (log_e - log_w[:, None])
    return 1.0 / np.logaddexp(0.0, z)


def sample_logistic_vector(d: int, alpha: float, rng: RngStream) -> np.ndarray:
    """One draw from the max-stable logistic distribution: joint CDF exp(-V(x))."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return np.exp(_logistic_log_block(d, alpha, rng.generator(), 1)[0])


def sample_opc_vector(d: int, alpha: float, rng: RngStream) -> np.ndarray:
    """One draw with standard Frechet margins and outer power Clayton
    dependence; lies in the logistic domain of attraction with the same alpha."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return _opc_block(d, alpha, rng.generator(), 1)[0]


# ----------------------------------------------------------------------
# block maxima
# ----------------------------------------------------------------------

def sample_max_block(
    n: int, d: int, model: str, alpha: float, rng: RngStream
) -> MaxBlockObservation:
    """Componentwise maximum of n i.i.d. vectors, scaled by 1/n, together
    with the occurrence partition of the raw block."""
    if n < 1:
        raise ValueError(f"block size must be >= 1, got {n}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    gen = rng.generator()
    if model == "logistic":
        log_block = _logistic_log_block(d, alpha, gen, n)
        partition = occurrence_partition(log_block)  # argmax invariant to exp
        maxima = np.exp(log_block.max(axis=0)) / n
    elif model == "opc":
        block = _opc_block(d, alpha, gen, n)
        partition = occurrence_partition(block)
        maxima = block.max(axis=0) / n
    else:
        raise ValueError(f"unknown model tag {model!r}; expected one of {MODEL_TAGS}")
    return MaxBlockObservation(maxima=maxima, partition=partition, n=n, d=d)


def sample_dataset(
    num_obs: int, n: int, d: int, model: str, alpha: float, rng: RngStream
) -> Dataset:
    """num_obs independent block-maxima observations on child streams of rng."""
    if num_obs < 1:
        raise ValueError(f"num_obs must be >= 1, got {num_obs}")
    obs = tuple(
        sample_max_block(n, d, model, alpha, rng.child(i)) for i in range(num_obs)
    )
    return Dataset(observations=obs, n=n, d=d, model=model, alpha_true=alpha)


# ----------------------------------------------------------------------
# dataset serialization
# ----------------------------------------------------------------------

def write_dataset_csv(ds: Dataset, path: str) -> None:
    """One CSV per dataset; maxima written with repr so the file round-trips
    losslessly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "n", "model", "alpha_true"])
        writer.writerow(
            [ds.d, ds.n, ds.model, "" if ds.alpha_true is None else repr(ds.alpha_true)]
        )
        writer.writerow(["obs", "partition"] + [f"x{j}" for j in range(1, ds.d + 1)])
        for i, obs in enumerate(ds.observations):
            writer.writerow(
                [i, obs.partition.to_string()] + [repr(float(v)) for v in obs.maxima]
            )


def read_dataset_csv(path: str) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["d", "n", "model", "alpha_true"]:
            raise ValueError(f"unrecognized dataset header in {path}")
        meta = next(reader)
        d, n, model = int(meta[0]), int(meta[1]), meta[2]
        alpha_true = float(meta[3]) if meta[3] else None
        next(reader)  # per-row header
        obs = []
        for row in reader:
            if not row:
                continue
            partition = Partition.from_string(row[1])
            maxima = np.array([float(v) for v in row[2 : 2 + d]])
            obs.append(MaxBlockObservation(maxima=maxima, partition=partition, n=n, d=d))
    return Dataset(observations=tuple(obs), n=n, d=d, model=model, alpha_true=alpha_true)
