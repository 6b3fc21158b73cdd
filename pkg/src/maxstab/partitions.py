"""Set partitions of {1, ..., d} and occurrence-time combinatorics.

A block-maxima vector carries an occurrence configuration: the grouping of
components by which underlying vector produced each componentwise maximum.
This module provides the canonical partition representation, enumeration,
one-block-split refinements, and the exact/asymptotic probability that all
maxima of an i.i.d. block occur in distinct vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, exp, factorial, log1p
from typing import Iterable, Iterator

import numpy as np

# Full enumeration is only ever needed as a small-dimension oracle; B_14 is
# about 1.9e8 terms, the practical desk limit.
ENUMERATION_CAP = 14

__all__ = [
    "ENUMERATION_CAP",
    "Partition",
    "canonicalize",
    "enumerate_partitions",
    "bell_number",
    "stirling2",
    "split_block_refinements",
    "refinement_count",
    "occurrence_partition",
    "ratio_exact",
    "ratio_approx",
]


@dataclass(frozen=True)
class Partition:
    """A set partition of {1, ..., d} in canonical form.

    Canonical form: indices ascending within each block, blocks ordered by
    their smallest element. Construct via :func:`canonicalize` unless the
    blocks are already canonical.
    """

    blocks: tuple[tuple[int, ...], ...]
    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        seen: set[int] = set()
        prev_first = 0
        for block in self.blocks:
            if not block:
                raise ValueError("empty block in partition")
            if any(block[i] >= block[i + 1] for i in range(len(block) - 1)):
                raise ValueError(f"block {block} is not in ascending order")
            if block[0] <= prev_first:
                raise ValueError("blocks are not ordered by smallest element")
            prev_first = block[0]
            for j in block:
                if not 1 <= j <= self.d:
                    raise ValueError(f"index {j} outside 1..{self.d}")
                if j in seen:
                    raise ValueError(f"index {j} appears in more than one block")
                seen.add(j)
        if len(seen) != self.d:
            missing = sorted(set(range(1, self.d + 1)) - seen)
            raise ValueError(f"indices {missing} are not covered by any block")

    @property
    def size(self) -> int:
        """Number of blocks m, 1 <= m <= d."""
        return len(self.blocks)

    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def to_string(self) -> str:
        """Canonical text encoding, e.g. "1,2|3,4|5"."""
        return "|".join(",".join(str(j) for j in block) for block in self.blocks)

    @classmethod
    def from_string(cls, text: str) -> "Partition":
        """Parse the "1,2|3,4|5" encoding; the dimension is the index count."""
        try:
            blocks = [
                tuple(int(tok) for tok in part.split(","))
                for part in text.split("|")
            ]
        except ValueError as exc:
            raise ValueError(f"malformed partition string {text!r}") from exc
        d = sum(len(b) for b in blocks)
        return canonicalize(blocks, d)

    def __str__(self) -> str:
        return self.to_string()


def canonicalize(blocks: Iterable[Iterable[int]], d: int) -> Partition:
    """Sort blocks into canonical form, validating the partition property."""
    canon = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[:1]))
    return Partition(canon, d)


def enumerate_partitions(d: int) -> Iterator[Partition]:
    """Yield every partition of {1, ..., d} exactly once, in canonical form.

    Iterates restricted growth strings, so partitions are produced lazily
    without materializing all bell_number(d) of them.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if d > ENUMERATION_CAP:
        raise ValueError(
            f"full enumeration capped at d <= {ENUMERATION_CAP}; got d={d}"
        )
    labels = [0] * d
    bound = [1] * d  # bound[i] = 1 + max(labels[:i]) for i >= 1
    while True:
        nblocks = max(labels) + 1
        grouped: list[list[int]] = [[] for _ in range(nblocks)]
        for idx, lab in enumerate(labels):
            grouped[lab].append(idx + 1)
        # first-occurrence labelling is already canonical
        yield Partition(tuple(tuple(b) for b in grouped), d)
        i = d - 1
        while i > 0 and labels[i] == bound[i]:
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        for j in range(i + 1, d):
            labels[j] = 0
            bound[j] = max(bound[j - 1], labels[j - 1] + 1)


_BELL_ROW: list[int] = [1]  # current Bell-triangle row, grown on demand
_BELL: list[int] = [1, 1]  # _BELL[d] = number of partitions of a d-set


def bell_number(d: int) -> int:
    """Exact number of partitions of a d-element set (arbitrary precision)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    while len(_BELL) <= d:
        row = _BELL_ROW
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        _BELL_ROW[:] = nxt
        _BELL.append(nxt[-1])
    return _BELL[d]


def stirling2(d: int, k: int) -> int:
    """Exact count of partitions of {1, ..., d} into k blocks."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 1 <= k <= d:
        raise ValueError(f"block count k={k} outside 1..{d}")
    row = [1]  # S(1, 1)
    for n in range(2, d + 1):
        nxt = [0] * n
        for j in range(n):
            kk = j + 1
            val = 0
            if j < len(row):
                val += kk * row[j]
            if j - 1 >= 0:
                val += row[j - 1]
            nxt[j] = val
        row = nxt
    return row[k - 1]


def split_block_refinements(p: Partition) -> list[Partition]:
    """All partitions obtained from p by splitting exactly one block in two.

    A block of size s yields 2**(s-1) - 1 distinct splits, so the result has
    refinement_count(p) entries, each of size p.size + 1.
    """
    out: list[Partition] = []
    for bi, block in enumerate(p.blocks):
        s = len(block)
        if s < 2:
            continue
        rest = block[1:]
        # keep the block's minimum in the first part so each unordered
        # split is produced once
        for r in range(s - 1):
            for tail in combinations(rest, r):
                part_a = (block[0],) + tail
                in_a = set(part_a)
                part_b = tuple(j for j in block if j not in in_a)
                blocks = [b for i, b in enumerate(p.blocks) if i != bi]
                blocks.extend((part_a, part_b))
                blocks.sort(key=lambda b: b[0])
                out.append(Partition(tuple(blocks), p.d))
    return out


def refinement_count(p: Partition) -> int:
    """Number of one-block-split refinements: sum over blocks of 2**(s-1) - 1."""
    return sum((1 << (s - 1)) - 1 for s in p.block_sizes())


def occurrence_partition(raw_block: np.ndarray) -> Partition:
    """Group columns of an n-by-d block by the row attaining each column maximum.

    Columns j and j' land in the same block iff the same row holds both column
    maxima. Ties (probability zero under continuous margins) resolve to the
    smallest attaining row index, so the result is deterministic.
    """
    arr = np.asarray(raw_block, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected an n-by-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("block contains non-finite entries")
    rows = np.argmax(arr, axis=0)  # first occurrence = smallest row index
    groups: dict[int, list[int]] = {}
    for col, row in enumerate(rows):
        groups.setdefault(int(row), []).append(col + 1)
    blocks = sorted((tuple(cols) for cols in groups.values()), key=lambda b: b[0])
    return Partition(tuple(blocks), arr.shape[1])


def ratio_exact(n: int, d: int) -> float:
    """Probability that d column maxima of an i.i.d. independent block come
    from d distinct rows: n! / ((n-d)! n^d), evaluated stably in log space.
    """
    if n < 1 or d < 1:
        raise ValueError(f"require n >= 1 and d >= 1, got n={n}, d={d}")
    if d > n:
        raise ValueError(
            f"d={d} exceeds block size n={n}; the probability is exactly 0"
        )
    return exp(sum(log1p(-k / n) for k in range(d)))


def ratio_approx(n: int, d: int) -> float:
    """Large-n approximation exp(-d^2 / (2n)) to ratio_exact."""
    if n < 1 or d < 1:
        raise ValueError(f"require n >= 1 and d >= 1, got n={n}, d={d}")
    return exp(-(d * d) / (2.0 * n))


def _set_partition_count(sizes: tuple[int, ...]) -> int:
    """Number of set partitions of a d-set with the given block-size multiset."""
    d = sum(sizes)
    count = factorial(d)
    for s in sizes:
        count //= factorial(s)
    mult: dict[int, int] = {}
    for s in sizes:
        mult[s] = mult.get(s, 0) + 1
    for m in mult.values():
        count //= factorial(m)
    return count


def _integer_partitions(d: int) -> Iterator[tuple[int, ...]]:
    """Integer partitions of d in decreasing order (block-size multisets)."""
    if d == 0:
        yield ()
        return
    parts = (d,)
    yield parts
    while True:
        i = len(parts) - 1
        while i > -1 and parts[i] <= 1:
            i -= 1
        if i == -1:
            return
        rem = len(parts) - i
        parts = parts[:i] + (parts[i] - 1,)
        while rem > 0:
            take = min(parts[-1], rem)
            parts += (take,)
            rem -= take
        yield parts
