"""Exact stationary law on the fixed-mass state space and its entropy analysis.

The jump process is reversible w.r.t. the product-Poisson-shaped measure

    weight(x) = prod_i ((n/rho) Q_i z^i)^(x_i) / x_i! * exp(-(n/rho) Q_i z^i)

for any activity z > 0; on the fixed-mass space the normalized law is
z-free (z^(sum i x_i) = z^n is state-independent).  All weight arithmetic is
done in log space with log-sum-exp normalization: weights span extreme
magnitudes already at n = 40.

The non-equilibrium potential -(rho/n) log Prob(x) decomposes exactly into
relative entropy, a reference tail, a Stirling remainder, and the log
normalizer; `potential_decomposition` computes each term independently and
cross-checks the identity to 1e-10 as a built-in bug detector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import ssa as ssa_mod
from . import state as state_mod
from .errors import (
    DivergentReferenceError,
    InternalInconsistencyError,
    InvalidStateError,
)
from .kernels import detailed_balance_coefficients, equilibrium_series
from .state import ENUMERATION_CAP

DECOMPOSITION_TOL = 1e-10
ORACLE_CAP = 12


@dataclass(eq=False)
class StationaryTable:
    """Enumerated state space with exact stationary weights (canonical order).

    Probabilities and log probabilities are normalized from the
    state-dependent part of the weights alone; the state-independent
    exp(-(n/rho) Q_i z^i) factor (huge at large activities) appears only in
    the reported log_weights and log_normalizer, where the measure's printed
    form requires it.
    """

    n: int
    rho: float
    z: float
    kernel: object
    parts: state_mod.PartitionTable = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    log_probabilities: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    log_normalizer: float

    def __len__(self):
        return len(self.parts)

    def configuration(self, idx):
        return state_mod.Configuration(self.n, self.rho, self.parts.counts_dict(idx))

    def index_of(self, cfg):
        if cfg.n != self.n or cfg.rho != self.rho:
            raise InvalidStateError(
                f"configuration (n={cfg.n}, rho={cfg.rho}) not in table "
                f"(n={self.n}, rho={self.rho})"
            )
        try:
            return self.parts.index_of(cfg.counts)
        except KeyError as exc:
            raise InvalidStateError(str(exc)) from exc

    def probability(self, cfg):
        return float(self.probabilities[self.index_of(cfg)])


def log_stationary_weight(cfg, kernel, z):
    """Log unnormalized stationary weight of one configuration.

    Includes the state-independent exp(-(n/rho) Q_i z^i) factors for every
    size i = 1..n, exactly as the measure is written.
    """
    if z <= 0:
        raise ValueError(f"activity z must be positive, got {z}")
    n, rho = cfg.n, cfg.rho
    log_q = detailed_balance_coefficients(kernel, n)
    logz = math.log(z)
    scale = math.log(n / rho)
    total = 0.0
    for size, cnt in cfg.counts.items():
        total += cnt * (scale + log_q[size - 1] + size * logz) - math.lgamma(cnt + 1)
    intensities = np.exp(log_q + np.arange(1, n + 1) * logz)
    return total - (n / rho) * float(np.sum(intensities))


def stationary_table(n, rho, kernel, z, cap=ENUMERATION_CAP):
    """Exact stationary distribution by full enumeration (n at most `cap`)."""
    if z <= 0:
        raise ValueError(f"activity z must be positive, got {z}")
    if n > cap:
        raise state_mod.StateSpaceTooLargeError(n, cap, state_mod.partition_count(n))
    parts = state_mod.partition_table(n)
    log_q = detailed_balance_coefficients(kernel, n)
    logz = math.log(z)
    sizes_idx = np.arange(1, n + 1)
    per_size = math.log(n / rho) + log_q + sizes_idx * logz
    flat = parts.counts * per_size[parts.sizes - 1] - gammaln(parts.counts + 1.0)
    log_w = np.add.reduceat(flat, parts.offsets[:-1])
    log_w -= (n / rho) * float(np.sum(np.exp(log_q + sizes_idx * logz)))
    log_b = float(logsumexp(log_w))
    probs = np.exp(log_w - log_b)
    return StationaryTable(n=n, rho=rho, z=float(z), kernel=kernel, parts=parts,
                           log_weights=log_w, probabilities=probs,
                           log_normalizer=log_b)


def detailed_balance_check(table):
    """Max relative violation of rate(x->y) p(x) = rate(y->x) p(y) over all edges."""
    kernel = table.kernel
    worst = 0.0
    for idx in range(len(table)):
        cfg = table.configuration(idx)
        p_here = table.probabilities[idx]
        for ch in ssa_mod.channel_rates(cfg, kernel):
            if ch.kind != "forward":
                continue
            nxt = state_mod.apply_jump(cfg, ch.index, "forward")
            j = table.index_of(nxt)
            size = ch.index + 1
            back_rate = kernel.b(size) * nxt.count(size)
            forward_flow = ch.rate * p_here
            backward_flow = back_rate * table.probabilities[j]
            worst = max(worst, abs(forward_flow - backward_flow) / forward_flow)
    return worst


def ctmc_stationary_oracle(n, rho, kernel):
    """Stationary law by dense linear solve of the generator (independent oracle).

    Builds the full generator from channel rates and jump application over
    the enumerated space, then solves pi Q = 0 with sum(pi) = 1.  Dense
    algebra: capped at n <= 12.
    """
    if n > ORACLE_CAP:
        raise state_mod.StateSpaceTooLargeError(n, ORACLE_CAP, state_mod.partition_count(n))
    states = state_mod.enumerate_states(n, rho)
    index = {cfg.key(): i for i, cfg in enumerate(states)}
    size = len(states)
    gen = np.zeros((size, size))
    for s, cfg in enumerate(states):
        for ch in ssa_mod.channel_rates(cfg, kernel):
            if ch.kind == "forward":
                target = state_mod.apply_jump(cfg, ch.index, "forward")
            else:
                target = state_mod.apply_jump(cfg, ch.index - 1, "backward")
            t = index[target.key()]
            gen[s, t] += ch.rate
            gen[s, s] -= ch.rate
    system = gen.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise InternalInconsistencyError(
            "generator system singular: state space not irreducible"
        ) from exc
    return pi


def relative_entropy(c, kernel, z, tail_cutoff=10_000_000, tol=1e-13):
    """Relative entropy sum_i { c_i (ln(c_i / (Q_i z^i)) - 1) + Q_i z^i }.

    The finite part runs over the support of c (0 ln 0 = 0); the reference
    sum is certified to `tol` or raises when it diverges (z beyond the
    critical activity).  Always nonnegative; zero exactly at c = c^z.
    """
    c = np.asarray(c, dtype=np.float64)
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("concentrations must be nonnegative and finite")
    series = equilibrium_series(kernel, z, moment=0, tol=tol, max_terms=tail_cutoff)
    if series.diverged:
        raise DivergentReferenceError(
            f"reference sum of Q_i z^i diverges at z={z}; pick z at or below the critical activity"
        )
    finite = 0.0
    if c.size:
        log_q = detailed_balance_coefficients(kernel, c.size)
        logz = math.log(z)
        support = c > 0
        idx = np.nonzero(support)[0]
        ci = c[idx]
        finite = float(np.sum(ci * (np.log(ci) - log_q[idx] - (idx + 1) * logz - 1.0)))
    return finite + series.value


def stirling_remainder(cfg):
    """Stirling remainder (rho/n) sum_i { ln x_i! - x_i ln x_i + x_i }.

    Empty sizes contribute nothing; a singleton cluster contributes exactly
    rho/n.  Evaluated with log-gamma, exact for integer counts in double
    precision.
    """
    total = 0.0
    for _size, cnt in cfg.counts.items():
        total += math.lgamma(cnt + 1) - cnt * math.log(cnt) + cnt
    return cfg.rho / cfg.n * total


def nonequilibrium_potential(cfg, table):
    """-(rho/n) log Prob(cfg) from the exact normalized table."""
    idx = table.index_of(cfg)
    log_prob = table.log_weights[idx] - table.log_normalizer
    return -(cfg.rho / cfg.n) * float(log_prob)


@dataclass(frozen=True)
class EntropyReport:
    """Terms of the exact potential decomposition at one configuration.

    reconstructed = entropy - reference_tail + stirling + normalizer_term
    must match the direct potential to DECOMPOSITION_TOL.
    """

    entropy: float
    reference_tail: float  # sum_{i>n} Q_i z^i
    reference_tail_bound: float  # residual beyond the summed terms
    stirling: float
    normalizer_term: float  # (rho/n) log B
    reconstructed: float
    direct: float

    @property
    def identity_gap(self):
        return abs(self.reconstructed - self.direct)


def potential_decomposition(cfg, kernel, z, table):
    """Split the direct potential into entropy + tail + Stirling + normalizer.

    The table must be built at the same activity z (the normalizer depends
    on it even though the direct potential does not).  A gap beyond
    DECOMPOSITION_TOL raises: the identity is exact, failure means a bug.
    """
    if z <= 0:
        raise ValueError(f"activity z must be positive, got {z}")
    if not math.isclose(z, table.z, rel_tol=0.0, abs_tol=0.0):
        raise ValueError(
            f"table was normalized at z={table.z}, decomposition requested at z={z}; "
            "build the table at the same activity"
        )
    n, rho = cfg.n, cfg.rho
    direct = nonequilibrium_potential(cfg, table)
    series = equilibrium_series(kernel, z, moment=0, tol=1e-15)
    if series.diverged:
        raise DivergentReferenceError(
            f"reference sum diverges at z={z}; the decomposition needs z at or "
            "below the critical activity"
        )
    log_q = detailed_balance_coefficients(kernel, n)
    head = float(np.sum(np.exp(log_q + np.arange(1, n + 1) * math.log(z))))
    tail = series.value - head
    entropy = relative_entropy(state_mod.to_concentrations(cfg), kernel, z)
    stirling = stirling_remainder(cfg)
    normalizer_term = rho / n * table.log_normalizer
    reconstructed = entropy - tail + stirling + normalizer_term
    report = EntropyReport(
        entropy=entropy, reference_tail=tail,
        reference_tail_bound=series.tail_bound, stirling=stirling,
        normalizer_term=normalizer_term, reconstructed=reconstructed,
        direct=direct,
    )
    if report.identity_gap > DECOMPOSITION_TOL:
        raise InternalInconsistencyError(
            f"potential decomposition violated by {report.identity_gap:.3e} "
            f"(tolerance {DECOMPOSITION_TOL:.0e})"
        )
    return report
