"""Rate-coefficient families and equilibrium-series analysis.

A kernel supplies the forward (monomer attachment) rates ``a(i)`` for i >= 1
and the backward (monomer detachment) rates ``b(i)`` for i >= 2.  From these
the detailed-balance coefficients

    Q_1 = 1,   Q_{i+1} = Q_i * a(i) / b(i+1)

are accumulated in log space, and the equilibrium family ``c_i = Q_i z^i`` is
analysed: critical activity (radius of convergence of the mass series),
critical mass, and the activity matching a prescribed total mass.

All series are summed with certified tail bounds: a geometric bound from a
rigorous upper bound on the trailing rate ratios, an integral bound for the
power-law family, and a rigorous divergence flag when the trailing rate
ratios keep every term from decaying.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidKernelError,
    ProfileOverflowError,
    SeriesCertificationError,
    SupercriticalMassError,
)

# partial sums above this with nondecreasing terms are declared divergent
DIVERGENCE_THRESHOLD = 1e12
# exp() overflows double precision just above this
_LOG_DBL_MAX = 709.0


def _check_positive(name, value):
    if not (value > 0) or not math.isfinite(value):
        raise InvalidKernelError(f"{name} must be a positive finite number, got {value}")


@dataclass(frozen=True)
class ConstantKernel:
    """Size-independent rates a(i) = a, b(i) = b."""

    a_rate: float = 1.0
    b_rate: float = 1.0
    family = "constant"

    def __post_init__(self):
        _check_positive("a", self.a_rate)
        _check_positive("b", self.b_rate)

    def a(self, i):
        return self.a_rate

    def b(self, i):
        return self.b_rate

    def a_range(self, lo, hi):
        return np.full(hi - lo + 1, self.a_rate)

    def b_range(self, lo, hi):
        return np.full(hi - lo + 1, self.b_rate)

    def rate_ratio_sup(self, i):
        return self.a_rate / self.b_rate

    def rate_ratio_inf(self, i):
        return self.a_rate / self.b_rate

    def tail_bound_override(self, n_last, z, moment):
        return math.inf

    @property
    def analytic_critical_activity(self):
        # Q_i = (a/b)^(i-1), so Q_i^(1/i) -> a/b
        return self.b_rate / self.a_rate

    def params(self):
        return {"a": self.a_rate, "b": self.b_rate}


@dataclass(frozen=True)
class LinearCoagulationKernel:
    """Linearly growing attachment a(i) = slope * i with constant detachment b."""

    slope: float = 1.0
    b_rate: float = 1.0
    family = "linear_coag"

    def __post_init__(self):
        _check_positive("slope", self.slope)
        _check_positive("b", self.b_rate)

    def a(self, i):
        return self.slope * i

    def b(self, i):
        return self.b_rate

    def a_range(self, lo, hi):
        return self.slope * np.arange(lo, hi + 1, dtype=np.float64)

    def b_range(self, lo, hi):
        return np.full(hi - lo + 1, self.b_rate)

    def rate_ratio_sup(self, i):
        return math.inf

    def rate_ratio_inf(self, i):
        return self.slope * i / self.b_rate

    def tail_bound_override(self, n_last, z, moment):
        return math.inf

    @property
    def analytic_critical_activity(self):
        # Q_i ~ (slope/b)^(i-1) (i-1)!, Q_i^(1/i) -> infinity
        return 0.0

    def params(self):
        return {"K": self.slope, "b": self.b_rate}


@dataclass(frozen=True)
class PowerLawKernel:
    """Unit attachment rates with power-law detailed-balance coefficients.

    Detachment is chosen as b(i) = (i/(i-1))^q so that Q_i = i^(-q) holds
    exactly for every size.
    """

    q: float = 4.0
    family = "power_law"

    def __post_init__(self):
        if not math.isfinite(self.q):
            raise InvalidKernelError(f"q must be finite, got {self.q}")

    def a(self, i):
        return 1.0

    def b(self, i):
        if i < 2:
            raise InvalidKernelError(f"b(i) defined for i >= 2, got {i}")
        return (i / (i - 1.0)) ** self.q

    def a_range(self, lo, hi):
        return np.ones(hi - lo + 1)

    def b_range(self, lo, hi):
        i = np.arange(lo, hi + 1, dtype=np.float64)
        return (i / (i - 1.0)) ** self.q

    def rate_ratio_sup(self, i):
        # a_j/b_{j+1} = (j/(j+1))^q: increasing toward 1 for q > 0
        r = (i / (i + 1.0)) ** self.q
        return max(r, 1.0) if self.q <= 0 else 1.0

    def rate_ratio_inf(self, i):
        r = (i / (i + 1.0)) ** self.q
        return min(r, 1.0) if self.q <= 0 else r

    def tail_bound_override(self, n_last, z, moment):
        # for z <= 1: sum_{j>N} j^moment Q_j z^j <= int_N^inf x^(moment-q) dx
        if z <= 1.0 and self.q - moment > 1.0:
            return n_last ** (moment - self.q + 1.0) / (self.q - moment - 1.0)
        return math.inf

    @property
    def analytic_critical_activity(self):
        # (i^-q)^(1/i) -> 1 for every q
        return 1.0

    def params(self):
        return {"q": self.q}


@dataclass(frozen=True)
class TabulatedKernel:
    """Explicit rate tables: a = (a_1, a_2, ...), b = (b_2, b_3, ...).

    Lookups beyond the tables raise.  Series certificates consult only the
    in-table trailing ratios; they are rigorous under the documented reading
    that trailing ratios beyond the horizon stay within the in-table range.
    """

    a_table: tuple
    b_table: tuple
    family = "tabulated"

    def __post_init__(self):
        object.__setattr__(self, "a_table", tuple(float(v) for v in self.a_table))
        object.__setattr__(self, "b_table", tuple(float(v) for v in self.b_table))
        if len(self.a_table) < 1 or len(self.b_table) < 1:
            raise InvalidKernelError("tabulated kernel needs at least a_1 and b_2")
        for j, v in enumerate(self.a_table, start=1):
            if not (v > 0 and math.isfinite(v)):
                raise InvalidKernelError(f"a({j}) must be positive and finite, got {v}")
        for j, v in enumerate(self.b_table, start=2):
            if not (v > 0 and math.isfinite(v)):
                raise InvalidKernelError(f"b({j}) must be positive and finite, got {v}")
        ratios = np.array(
            [
                self.a_table[j - 1] / self.b_table[j - 1]
                for j in range(1, self.ratio_coverage + 1)
            ]
        )
        object.__setattr__(self, "_ratios", ratios)

    @property
    def ratio_coverage(self):
        # largest j with both a_j and b_{j+1} tabulated
        return min(len(self.a_table), len(self.b_table))

    def a(self, i):
        if not 1 <= i <= len(self.a_table):
            raise InvalidKernelError(f"a({i}) outside table (covers 1..{len(self.a_table)})")
        return self.a_table[i - 1]

    def b(self, i):
        if not 2 <= i <= len(self.b_table) + 1:
            raise InvalidKernelError(f"b({i}) outside table (covers 2..{len(self.b_table) + 1})")
        return self.b_table[i - 2]

    def a_range(self, lo, hi):
        if lo < 1 or hi > len(self.a_table):
            raise InvalidKernelError(f"a range {lo}..{hi} outside table (covers 1..{len(self.a_table)})")
        return np.asarray(self.a_table[lo - 1 : hi])

    def b_range(self, lo, hi):
        if lo < 2 or hi > len(self.b_table) + 1:
            raise InvalidKernelError(f"b range {lo}..{hi} outside table (covers 2..{len(self.b_table) + 1})")
        return np.asarray(self.b_table[lo - 2 : hi - 1])

    def rate_ratio_sup(self, i):
        i = min(i, self.ratio_coverage)
        return float(np.max(self._ratios[i - 1 :]))

    def rate_ratio_inf(self, i):
        i = min(i, self.ratio_coverage)
        return float(np.min(self._ratios[i - 1 :]))

    def tail_bound_override(self, n_last, z, moment):
        return math.inf

    @property
    def analytic_critical_activity(self):
        return None

    def params(self):
        return {}


KERNEL_FAMILIES = {
    "constant": ConstantKernel,
    "linear_coag": LinearCoagulationKernel,
    "power_law": PowerLawKernel,
    "tabulated": TabulatedKernel,
}


def detailed_balance_coefficients(kernel, i_max):
    """Log detailed-balance coefficients log Q_i for i = 1..i_max.

    Accumulated as log Q_{i+1} = log Q_i + log a(i) - log b(i+1), entirely in
    log space: Q_i spans hundreds of orders of magnitude for generic kernels.
    """
    if i_max < 1:
        raise ValueError(f"i_max must be >= 1, got {i_max}")
    out = np.zeros(i_max)
    if i_max > 1:
        la = np.log(kernel.a_range(1, i_max - 1))
        lb = np.log(kernel.b_range(2, i_max))
        out[1:] = np.cumsum(la - lb)
    return out


@dataclass(frozen=True)
class SeriesSum:
    """Certified partial sum of sum_i i^moment Q_i z^i."""

    value: float
    tail_bound: float
    diverged: bool
    n_terms: int


def equilibrium_series(kernel, z, moment=1, tol=1e-12, max_terms=10_000_000, block=65536):
    """Sum the weighted equilibrium series sum_{i>=1} i^moment Q_i z^i.

    Stops once a rigorous tail bound (geometric ratio test against the
    trailing rate-ratio supremum, or a kernel-specific integral bound) falls
    below ``tol``.  Declares divergence rigorously when the trailing
    rate-ratio infimum times z reaches 1 (terms can no longer decay), or
    heuristically when partial sums pass DIVERGENCE_THRESHOLD with
    nondecreasing terms.
    """
    if z <= 0 or not math.isfinite(z):
        raise ValueError(f"activity z must be positive and finite, got {z}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    logz = math.log(z)
    partial = 0.0
    log_q = 0.0  # log Q_{i0}
    i0 = 1
    while i0 <= max_terms:
        if kernel.rate_ratio_inf(i0) * z >= 1.0:
            # every later term ratio is >= 1: terms never decay
            return SeriesSum(math.inf, math.inf, True, i0 - 1)
        i1 = min(i0 + block - 1, max_terms)
        idx = np.arange(i0, i1 + 1, dtype=np.float64)
        incr = np.log(kernel.a_range(i0, i1)) - np.log(kernel.b_range(i0 + 1, i1 + 1))
        csum = np.cumsum(incr)
        log_qs = log_q + np.concatenate(([0.0], csum[:-1]))
        with np.errstate(over="ignore"):
            terms = np.exp(moment * np.log(idx) + log_qs + idx * logz)
        partial += float(np.sum(terms))
        nondecreasing = bool(np.all(np.diff(terms) >= 0.0))
        if not math.isfinite(partial) or (partial > DIVERGENCE_THRESHOLD and nondecreasing):
            return SeriesSum(math.inf, math.inf, True, i1)
        # convergence certificates at the block end
        t_last = float(terms[-1])
        ratio = kernel.rate_ratio_sup(i1) * z * ((i1 + 1.0) / i1) ** moment
        bound = math.inf
        if ratio < 1.0:
            bound = t_last * ratio / (1.0 - ratio)
        bound = min(bound, kernel.tail_bound_override(i1, z, moment))
        if bound <= tol:
            return SeriesSum(partial, bound, False, i1)
        log_q += float(csum[-1])
        i0 = i1 + 1
    raise SeriesCertificationError(
        f"series sum_i i^{moment} Q_i z^i at z={z} reached {max_terms} terms "
        "without a convergence or divergence certificate"
    )


@dataclass(frozen=True)
class ActivityEstimate:
    """Critical-activity estimate with the raw (log Q_i)/i diagnostic sequence.

    The limit superior of Q_i^(1/i) is not computable from finitely many
    terms; ``diagnostics`` exposes (log Q_i)/i for inspection, and the
    returned value uses the trailing-window maximum as a limsup proxy unless
    the kernel has a closed form.
    """

    value: float
    diagnostics: np.ndarray
    source: str  # "analytic" or "probe"

    @property
    def i_probe(self):
        return len(self.diagnostics)


def critical_activity(kernel, i_probe=1000, prefer_analytic=True):
    """Estimate the critical activity (radius of convergence of the mass series)."""
    if i_probe < 10:
        raise ValueError(f"i_probe must be >= 10, got {i_probe}")
    coverage = getattr(kernel, "ratio_coverage", None)
    if coverage is not None:
        i_probe = min(i_probe, coverage + 1)
    log_q = detailed_balance_coefficients(kernel, i_probe)
    diagnostics = log_q / np.arange(1, i_probe + 1)
    analytic = kernel.analytic_critical_activity
    if prefer_analytic and analytic is not None:
        return ActivityEstimate(analytic, diagnostics, "analytic")
    trailing = diagnostics[i_probe // 2 :]
    return ActivityEstimate(float(np.exp(-np.max(trailing))), diagnostics, "probe")


@dataclass(frozen=True)
class CriticalMass:
    """Critical mass: supremum of equilibrium masses over subcritical activities."""

    value: float  # math.inf when the mass series diverges at the critical activity
    tail_bound: float
    diverged: bool
    n_terms: int

    @property
    def is_finite(self):
        return not self.diverged


def critical_mass(kernel, zs, tol=1e-10):
    """Evaluate sup_{z<zs} sum_i i Q_i z^i as the limit series at z = zs."""
    if zs <= 0:
        raise ValueError(f"critical activity must be positive, got {zs}")
    s = equilibrium_series(kernel, zs, moment=1, tol=tol)
    if s.diverged:
        return CriticalMass(math.inf, math.inf, True, s.n_terms)
    return CriticalMass(s.value, s.tail_bound, False, s.n_terms)


def activity_for_mass(kernel, rho, tol=1e-10, zs=None):
    """Solve ||c^z|| = rho for the activity z by bisection over (0, zs).

    The map z -> ||c^z|| is monotone; bisection avoids derivative blow-up at
    the critical activity.  Raises SupercriticalMassError for rho above the
    critical mass, returns zs at the critical mass itself (within tol).
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if zs is None:
        zs = critical_activity(kernel).value
    if zs <= 0:
        raise SupercriticalMassError(rho, 0.0, zs)
    cm = critical_mass(kernel, zs, tol=min(tol, 1e-10))
    if not cm.diverged:
        if abs(rho - cm.value) <= tol:
            return zs
        if rho > cm.value:
            raise SupercriticalMassError(rho, cm.value, zs)
    lo, hi = 0.0, zs
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        s = equilibrium_series(kernel, mid, moment=1, tol=tol / 10.0)
        if not s.diverged and abs(s.value - rho) <= tol:
            return mid
        if s.diverged or s.value > rho:
            hi = mid
        else:
            lo = mid
    raise SeriesCertificationError(
        f"bisection for the activity matching mass {rho} did not reach tolerance {tol}"
    )


@dataclass(frozen=True)
class EquilibriumProfile:
    """Equilibrium coefficients c_i = Q_i z^i up to a truncation index."""

    z: float
    coefficients: np.ndarray = field(repr=False)
    i_max: int
    mass: float  # sum_{i<=i_max} i c_i
    mass_tail_bound: float  # rigorous bound on the mass beyond i_max (inf if uncertified)

    def __len__(self):
        return self.i_max


def equilibrium_profile(kernel, z, i_max):
    """Evaluate the equilibrium profile c_i = exp(log Q_i + i log z), i = 1..i_max."""
    if z <= 0 or not math.isfinite(z):
        raise ValueError(f"activity z must be positive and finite, got {z}")
    if i_max < 1:
        raise ValueError(f"i_max must be >= 1, got {i_max}")
    log_q = detailed_balance_coefficients(kernel, i_max)
    idx = np.arange(1, i_max + 1, dtype=np.float64)
    logs = log_q + idx * math.log(z)
    too_big = np.nonzero(logs > _LOG_DBL_MAX)[0]
    if too_big.size:
        i_bad = int(too_big[0]) + 1
        raise ProfileOverflowError(i_bad, float(logs[too_big[0]]))
    coeffs = np.exp(logs)
    mass = float(np.sum(idx * coeffs))
    t_last = float(idx[-1] * coeffs[-1])
    ratio = kernel.rate_ratio_sup(i_max) * z * (i_max + 1.0) / i_max
    tail = t_last * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
    tail = min(tail, kernel.tail_bound_override(i_max, z, 1))
    return EquilibriumProfile(z, coeffs, i_max, mass, tail)


def kernel_to_dict(kernel):
    """Serializable description: {family, params, a_table/b_table}."""
    d = {"family": kernel.family, "params": kernel.params()}
    if kernel.family == "tabulated":
        d["a_table"] = list(kernel.a_table)
        d["b_table"] = list(kernel.b_table)
    return d


def kernel_from_dict(d, field_prefix="kernel"):
    """Build a kernel from its serialized form, with field-precise errors."""
    from .errors import ConfigError

    if not isinstance(d, dict):
        raise ConfigError("kernel description must be a mapping", field=field_prefix)
    family = d.get("family")
    if family not in KERNEL_FAMILIES:
        raise ConfigError(
            f"unknown kernel family {family!r}, expected one of {sorted(KERNEL_FAMILIES)}",
            field=f"{field_prefix}.family",
        )
    params = d.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping", field=f"{field_prefix}.params")
    try:
        if family == "constant":
            return ConstantKernel(float(params.get("a", 1.0)), float(params.get("b", 1.0)))
        if family == "linear_coag":
            return LinearCoagulationKernel(float(params.get("K", 1.0)), float(params.get("b", 1.0)))
        if family == "power_law":
            return PowerLawKernel(float(params.get("q", 4.0)))
        a_table = d.get("a_table")
        b_table = d.get("b_table")
        if a_table is None or b_table is None:
            raise ConfigError(
                "tabulated kernel needs a_table and b_table",
                field=f"{field_prefix}.a_table",
            )
        return TabulatedKernel(tuple(a_table), tuple(b_table))
    except InvalidKernelError as exc:
        raise ConfigError(str(exc), field=f"{field_prefix}.params") from exc
