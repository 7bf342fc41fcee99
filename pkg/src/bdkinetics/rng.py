"""Seedable, splittable pseudo-random generator for reproducible simulation.

Algorithm (fixed, part of the output contract):

* State derivation: splitmix64.  A 64-bit seed s feeds the splitmix64
  sequence out_k = mix64(s + (k+1) * 0x9E3779B97F4A7C15); the four state
  words of a stream are consecutive outputs.
* Stream k of a master seed uses outputs 4k+1 .. 4k+4, so replica streams
  are defined by (master_seed, k) alone: independent of scheduling.
* Generation: xoshiro256** (Blackman/Vigna), 64-bit outputs.
* uniform() maps the top 53 bits to [0, 1): (x >> 11) * 2**-53.
* exponential(rate) = -log1p(-uniform()) / rate.

Identical (seed, draw sequence) give bit-identical values on every platform
with IEEE-754 doubles.  The hot-path primitives are numba-compiled and are
the same functions the pure-Python wrapper calls, so simulation results do
not depend on which path invokes them.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U5 = np.uint64(5)
_U7 = np.uint64(7)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U45 = np.uint64(45)
_U64 = np.uint64(64)
_INV53 = float(2.0**-53)


@njit(cache=True, nogil=True)
def splitmix64(k, seed):
    """k-th output (k >= 1) of the splitmix64 stream started at seed."""
    z = seed + np.uint64(k) * _GOLDEN
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def stream_state(master_seed, stream):
    """Fresh xoshiro256** state for stream index `stream` of a master seed."""
    s = np.empty(4, dtype=np.uint64)
    base = 4 * stream
    for j in range(4):
        s[j] = splitmix64(base + j + 1, master_seed)
    if s[0] == 0 and s[1] == 0 and s[2] == 0 and s[3] == 0:
        s[0] = _GOLDEN  # xoshiro forbids the all-zero state
    return s


@njit(cache=True, nogil=True)
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@njit(cache=True, nogil=True)
def next_u64(s):
    """Advance the xoshiro256** state in place and return one 64-bit output."""
    result = _rotl(s[1] * _U5, _U7) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U45)
    return result


@njit(cache=True, nogil=True)
def uniform(s):
    """Uniform double in [0, 1) from the top 53 bits of one output."""
    return float(next_u64(s) >> _U11) * _INV53


@njit(cache=True, nogil=True)
def exponential(s, rate):
    """Exponential waiting time with the given rate, by inversion."""
    return -math.log1p(-uniform(s)) / rate


class RandomState:
    """Convenience wrapper holding one stream's state."""

    __slots__ = ("state", "master_seed", "stream")

    def __init__(self, seed, stream=0):
        self.master_seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream)
        self.state = stream_state(np.uint64(self.master_seed), self.stream)

    def spawn(self, stream):
        """Independent stream of the same master seed (scheduling-free rule)."""
        return RandomState(self.master_seed, stream)

    def next_u64(self):
        return int(next_u64(self.state))

    def uniform(self):
        return uniform(self.state)

    def exponential(self, rate):
        return exponential(self.state, rate)

    def __repr__(self):
        return f"RandomState(seed={self.master_seed}, stream={self.stream})"
