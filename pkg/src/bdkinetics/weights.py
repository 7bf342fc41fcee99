"""Superlinear convex weights for tail-mass control.

A weight phi is built from an increasing integer threshold sequence
N_0 < N_1 < ... (N_0 >= 2) via a piecewise-linear integrand p:

    p(t) = t                                  on [0, 1]
    p(t) = (t + N_0 - 2) / (N_0 - 1)          on [1, N_0]
    p(t) = (t - N_m) / (N_{m+1} - N_m) + m+2  on [N_m, N_{m+1}]

and phi(y) = integral of p from 0 to y, an exact piecewise quadratic.  The
slope of p drops across segments (never below zero), so phi is convex with a
concave, nondecreasing derivative, phi(x) = x^2/2 on [0, 1] exactly, and
phi'(x) <= x.  Each slope plateau raises p by one, so phi(x)/x grows without
bound: the weight is superlinear.

Gap condition (counting the [1, N_0] segment as the zeroth gap N_0 - 1):
N_{m+1} - N_m must be nondecreasing, which is exactly concavity of p.
Beyond the last tabulated threshold the sequence continues with the final
gap repeated, keeping every property intact.

The band levels alpha_k (2 below N_0, then m+3 on [N_m, N_{m+1})) satisfy
phi(k+1) <= (k+1) alpha_{k+1}; choosing N_m so the (k+1)-weighted tail mass
of an initial family stays below 1/(m+3)^3 makes the phi-moment of the
family finite uniformly, which is the whole point of the construction.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidThresholdsError


def _validate_thresholds(thresholds):
    t = [int(v) for v in thresholds]
    if len(t) < 1:
        raise InvalidThresholdsError("need at least one threshold")
    if list(map(float, thresholds)) != list(map(float, t)):
        raise InvalidThresholdsError("thresholds must be integers")
    if t[0] < 2:
        raise InvalidThresholdsError(f"N_0 must be >= 2, got {t[0]}")
    gaps = [t[0] - 1] + [b - a for a, b in zip(t, t[1:])]
    for k in range(1, len(gaps)):
        if gaps[k] < 1:
            raise InvalidThresholdsError(f"thresholds must be strictly increasing at N_{k}")
        if gaps[k] < gaps[k - 1]:
            raise InvalidThresholdsError(
                f"monotone-gap condition violated at N_{k}: gap {gaps[k]} < previous {gaps[k - 1]}"
            )
    return t


class SuperlinearWeight:
    """Exact evaluator of the piecewise-quadratic weight phi and its integrand."""

    def __init__(self, thresholds):
        self.thresholds = tuple(_validate_thresholds(thresholds))
        breaks = [0.0, 1.0] + [float(v) for v in self.thresholds]
        p_vals = [0.0, 1.0] + [float(m + 2) for m in range(len(self.thresholds))]
        self._breaks = np.array(breaks)
        self._p = np.array(p_vals)
        self._phi = np.concatenate(
            ([0.0], np.cumsum(0.5 * (self._p[:-1] + self._p[1:]) * np.diff(self._breaks)))
        )

    @property
    def final_gap(self):
        if len(self.thresholds) >= 2:
            return self.thresholds[-1] - self.thresholds[-2]
        return max(self.thresholds[0] - 1, 1)

    def _ensure(self, y_max):
        """Extend the cached breakpoints (final gap repeated) to cover y_max."""
        while self._breaks[-1] < y_max:
            nxt = self._breaks[-1] + self.final_gap
            p_nxt = self._p[-1] + 1.0
            self._phi = np.append(
                self._phi,
                self._phi[-1] + 0.5 * (self._p[-1] + p_nxt) * (nxt - self._breaks[-1]),
            )
            self._breaks = np.append(self._breaks, nxt)
            self._p = np.append(self._p, p_nxt)

    def integrand(self, t):
        """p(t): piecewise linear, nondecreasing, concave, p(t) <= t."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise ValueError("integrand defined for t >= 0")
        self._ensure(float(t.max(initial=0.0)))
        seg = np.clip(np.searchsorted(self._breaks, t, side="left") - 1, 0, len(self._breaks) - 2)
        width = self._breaks[seg + 1] - self._breaks[seg]
        slope = (self._p[seg + 1] - self._p[seg]) / width
        return self._p[seg] + slope * (t - self._breaks[seg])

    def __call__(self, y):
        """phi(y) = integral of the integrand; exact piecewise quadratic."""
        y_arr = np.asarray(y, dtype=np.float64)
        if np.any(y_arr < 0):
            raise ValueError("weight defined for y >= 0")
        self._ensure(float(y_arr.max(initial=0.0)))
        seg = np.clip(np.searchsorted(self._breaks, y_arr, side="left") - 1, 0, len(self._breaks) - 2)
        width = self._breaks[seg + 1] - self._breaks[seg]
        slope = (self._p[seg + 1] - self._p[seg]) / width
        d = y_arr - self._breaks[seg]
        out = self._phi[seg] + self._p[seg] * d + 0.5 * slope * d * d
        return float(out) if np.isscalar(y) or y_arr.ndim == 0 else out

    def derivative(self, y):
        return self.integrand(y)

    def alpha(self, k):
        """Band level: 2 below N_0, then m+3 on [N_m, N_{m+1})."""
        k = int(k)
        if k < 0:
            raise ValueError("alpha defined for k >= 0")
        if k <= self.thresholds[0] - 1:
            return 2.0
        if k >= self.thresholds[-1]:
            m = len(self.thresholds) - 1 + (k - self.thresholds[-1]) // self.final_gap
        else:
            m = int(np.searchsorted(np.asarray(self.thresholds), k, side="right")) - 1
        return float(m + 3)

    def values_table(self, n):
        """phi(i) for i = 0..n as a table for moment tracking (index 0 unused)."""
        return self.__call__(np.arange(0, n + 1, dtype=np.float64))


def build_superlinear_weight(thresholds):
    """Validated weight from an explicit threshold sequence."""
    return SuperlinearWeight(thresholds)


def thresholds_from_tail_masses(initial_measures, n_bands=8):
    """Threshold sequence from a family of initial size distributions.

    ``initial_measures`` are concentration arrays (entry j is the mass of
    integer size j+1).  N_m is the smallest cutoff whose worst-case
    (k+1)-weighted tail falls below 1/(m+3)^3, then pushed up as needed so
    the gaps never shrink (with the zeroth gap N_0 - 1 included).
    """
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    arrays = [np.asarray(m, dtype=np.float64) for m in initial_measures]
    if not arrays:
        raise ValueError("need at least one initial measure")
    longest = max(a.size for a in arrays)
    weighted = np.zeros((len(arrays), longest))
    for row, a in enumerate(arrays):
        weighted[row, : a.size] = a * (np.arange(1, a.size + 1) + 1.0)
    # tail[N] = max_n sum_{k >= N} (k+1) M_k^n, for N = 1..longest+1
    suffix = np.zeros((len(arrays), longest + 1))
    suffix[:, :-1] = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1]
    worst_tail = suffix.max(axis=0)

    def smallest_cutoff(bound):
        idx = np.nonzero(worst_tail < bound)[0]
        return int(idx[0]) + 1 if idx.size else longest + 1

    thresholds = []
    prev, prev_gap = 1, 1
    for m in range(n_bands):
        candidate = smallest_cutoff(1.0 / (m + 3) ** 3)
        if m == 0:
            n0 = max(candidate, 2)
            thresholds.append(n0)
            prev, prev_gap = n0, n0 - 1
        else:
            nm = max(candidate, prev + max(prev_gap, 1))
            thresholds.append(nm)
            prev, prev_gap = nm, nm - thresholds[m - 1]
    return thresholds
