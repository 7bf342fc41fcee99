"""Cluster-count configurations and exact enumeration of the fixed-mass state space.

A configuration holds integer counts x_i of clusters of size i with the exact
integer invariant sum_i i*x_i = n; the matching concentration vector is
c_i = (rho/n) x_i, so the total mass sum_i i*c_i equals rho exactly.  The
state space for given n is in bijection with the integer partitions of n.

Canonical enumeration order: partitions as nonincreasing part lists, sorted
ascending lexicographically ([1,1,1,1] first, [n] last).  Stationary tables
and oracle matrices index states identically through this order.
"""
from __future__ import annotations

from array import array
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType

import numpy as np

from .errors import InfeasibleJumpError, StateSpaceTooLargeError

ENUMERATION_CAP = 60


@dataclass(frozen=True)
class Configuration:
    """A point of the fixed-mass state space: sparse positive cluster counts."""

    n: int
    rho: float
    counts: MappingProxyType

    def __init__(self, n, rho, counts):
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if not rho > 0:
            raise ValueError(f"rho must be positive, got {rho}")
        cleaned = {}
        total = 0
        for size in sorted(counts):
            cnt = counts[size]
            if cnt == 0:
                continue
            if size < 1 or size > n:
                raise ValueError(f"cluster size {size} outside 1..{n}")
            if cnt < 0:
                raise ValueError(f"count for size {size} must be nonnegative, got {cnt}")
            cleaned[int(size)] = int(cnt)
            total += size * cnt
        if total != n:
            raise ValueError(f"mass invariant violated: sum i*x_i = {total} != n = {n}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "rho", float(rho))
        object.__setattr__(self, "counts", MappingProxyType(cleaned))

    @property
    def mass(self):
        """Total mass sum_i i*c_i; exactly rho by the integer invariant."""
        return self.rho

    @property
    def max_size(self):
        return max(self.counts)

    def count(self, size):
        return self.counts.get(size, 0)

    def concentration(self, size):
        return self.rho / self.n * self.counts.get(size, 0)

    def key(self):
        """Hashable canonical identity (size, count) pairs, sizes ascending."""
        return tuple(self.counts.items())

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.n == other.n
            and self.rho == other.rho
            and dict(self.counts) == dict(other.counts)
        )

    def __hash__(self):
        return hash((self.n, self.rho, self.key()))

    def __repr__(self):
        return f"Configuration(n={self.n}, rho={self.rho}, {format_counts(self.counts)})"


def from_monomers(n, rho):
    """Canonical initial condition: all mass in monomers."""
    return Configuration(n, rho, {1: n})


def to_concentrations(cfg):
    """Dense concentration vector c_i = (rho/n) x_i for i = 1..max stored size."""
    out = np.zeros(cfg.max_size)
    scale = cfg.rho / cfg.n
    for size, cnt in cfg.counts.items():
        out[size - 1] = scale * cnt
    return out


def apply_jump(cfg, i, direction):
    """Apply one reaction at index i: forward fuses a monomer onto a size-i
    cluster, backward splits a monomer off a size-(i+1) cluster.

    Returns a new Configuration; the mass invariant is preserved exactly.
    """
    if i < 1:
        raise InfeasibleJumpError(f"reaction index must be >= 1, got {i}")
    counts = dict(cfg.counts)
    if direction == "forward":
        need_monomers = 2 if i == 1 else 1
        if counts.get(1, 0) < need_monomers or counts.get(i, 0) < 1:
            raise InfeasibleJumpError(
                f"forward jump at i={i} infeasible in {format_counts(cfg.counts)}"
            )
        _dec(counts, 1)
        _dec(counts, i)
        counts[i + 1] = counts.get(i + 1, 0) + 1
    elif direction == "backward":
        if counts.get(i + 1, 0) < 1:
            raise InfeasibleJumpError(
                f"backward jump at i={i} infeasible in {format_counts(cfg.counts)}"
            )
        _dec(counts, i + 1)
        counts[i] = counts.get(i, 0) + 1
        counts[1] = counts.get(1, 0) + 1
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    return Configuration(cfg.n, cfg.rho, counts)


def _dec(counts, size):
    counts[size] -= 1
    if counts[size] == 0:
        del counts[size]


def partition_count(n):
    """Partition function p(n) by the Euler pentagonal-number recurrence."""
    p = [1] + [0] * n
    for m in range(1, n + 1):
        total, k = 0, 1
        while True:
            g1 = k * (3 * k - 1) // 2
            g2 = k * (3 * k + 1) // 2
            if g1 > m and g2 > m:
                break
            sign = 1 if k % 2 else -1
            if g1 <= m:
                total += sign * p[m - g1]
            if g2 <= m:
                total += sign * p[m - g2]
            k += 1
        p[m] = total
    return p[n]


class PartitionTable:
    """Compact run-length storage of every partition of n, in canonical order.

    State s occupies entries offsets[s]..offsets[s+1] of the flat arrays;
    sizes are stored descending within a state, counts are the multiplicities.
    """

    __slots__ = ("n", "sizes", "counts", "offsets")

    def __init__(self, n, sizes, counts, offsets):
        self.n = n
        self.sizes = sizes
        self.counts = counts
        self.offsets = offsets

    def __len__(self):
        return len(self.offsets) - 1

    def runs(self, idx):
        """(sizes desc, counts) arrays of state idx."""
        lo, hi = self.offsets[idx], self.offsets[idx + 1]
        return self.sizes[lo:hi], self.counts[lo:hi]

    def counts_dict(self, idx):
        sizes, counts = self.runs(idx)
        return {int(s): int(c) for s, c in zip(sizes[::-1], counts[::-1])}

    def index_of(self, counts):
        """Canonical index of a counts mapping, by binary search on the order."""
        target = sorted(counts.items(), reverse=True)  # runs, sizes descending
        lo, hi = 0, len(self)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._compare(mid, target) < 0:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self) and self._compare(lo, target) == 0:
            return lo
        raise KeyError(f"state {dict(counts)} not in the partition table for n={self.n}")

    def _compare(self, idx, target):
        sizes, counts = self.runs(idx)
        for (s, c), (ts, tc) in zip(zip(sizes, counts), target):
            if s != ts:
                return -1 if s < ts else 1
            if c != tc:
                return -1 if c < tc else 1
        return 0  # equal-mass partitions cannot be strict prefixes of each other


@lru_cache(maxsize=8)
def partition_table(n):
    """Enumerate all partitions of n into a PartitionTable (cached)."""
    sizes = array("i")
    counts = array("i")
    offsets = array("q", [0])
    stack = []  # runs of the current prefix, sizes ascending as appended

    def fill(remaining, max_part):
        if remaining == 0:
            for s, c in stack:  # appended largest-first: sizes descending
                sizes.append(s)
                counts.append(c)
            offsets.append(len(sizes))
            return
        for part in range(1, min(remaining, max_part) + 1):
            for mult in range(1, remaining // part + 1):
                rest = remaining - part * mult
                if rest == 0 or part > 1:
                    stack.append((part, mult))
                    fill(rest, part - 1)
                    stack.pop()

    fill(n, n)
    return PartitionTable(
        n,
        np.frombuffer(sizes, dtype=np.int32).copy() if sizes else np.zeros(0, np.int32),
        np.frombuffer(counts, dtype=np.int32).copy() if counts else np.zeros(0, np.int32),
        np.frombuffer(offsets, dtype=np.int64).copy(),
    )


def enumerate_states(n, rho, cap=ENUMERATION_CAP):
    """All configurations of the fixed-mass space, in canonical order.

    The count equals the partition function p(n).  Refuses n above the cap:
    exact enumeration is meant for desk-scale stationary computations.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > cap:
        raise StateSpaceTooLargeError(n, cap, partition_count(n))
    table = partition_table(n)
    return [Configuration(n, rho, table.counts_dict(i)) for i in range(len(table))]


def format_counts(counts):
    """Textual configuration literal, e.g. '1:2,2:1' for two monomers and a dimer."""
    return ",".join(f"{size}:{counts[size]}" for size in sorted(counts))


def parse_counts(text, n, rho=None):
    """Parse a textual configuration literal and validate it against n.

    Returns a counts dict; builds a Configuration when rho is given.
    """
    counts = {}
    text = text.strip()
    if not text:
        raise ValueError("empty configuration literal")
    for item in text.split(","):
        try:
            size_s, cnt_s = item.split(":")
            size, cnt = int(size_s), int(cnt_s)
        except ValueError as exc:
            raise ValueError(f"malformed configuration item {item!r}, expected 'size:count'") from exc
        if size in counts:
            raise ValueError(f"duplicate size {size} in configuration literal")
        counts[size] = cnt
    total = sum(s * c for s, c in counts.items())
    if total != n:
        raise ValueError(f"configuration literal has mass {total}, expected n = {n}")
    if rho is None:
        return counts
    return Configuration(n, rho, counts)
