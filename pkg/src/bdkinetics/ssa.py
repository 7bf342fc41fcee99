"""Exact stochastic simulation of the cluster-growth jump process.

Direct-method kinetic Monte Carlo: exponential waiting times at the total
exit rate, channel selection proportional to channel rates.  In count
variables x_i (concentrations are c_i = (rho/n) x_i) the jump rates are

    forward i = 1:     a(1) * (rho/n) * x_1 * (x_1 - 1)
    forward i >= 2:    a(i) * (rho/n) * x_1 * x_i
    backward size s:   b(s) * x_s          (s >= 2)

These are the unique continuous-time Markov chain rates consistent with the
concentration-scaled generator acting on coordinate functions; the test
suite checks them against the generator applied to coordinates directly.

Selection is O(log n): every forward rate for i >= 2 is proportional to
(rho/n) * x_1, so those channels are stored unscaled (a_i * x_i) in one sum
tree and rescaled at the root by the cached monomer factor; the i = 1
channel is a scalar; backward channels live in a second tree.  A jump
touches at most three cluster sizes, so at most four leaf updates.  Trees
are rebuilt from scratch every `rebuild_every` jumps to cancel float drift,
and the exact integer mass invariant is re-verified at the same cadence.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import state as state_mod
from .errors import AbsorbingStateError, SimulationCorruptionError
from .rng import exponential, stream_state, uniform
from .sumtree import capacity_for, tree_find, tree_rebuild, tree_set

DEFAULT_REBUILD_EVERY = 1_000_000
_JUMP_LOG_MAX_N = 15  # state keys are base-(n+1) digits packed in int64


def _rate_arrays(kernel, n):
    """Dense rate tables a[i] (i = 1..n-1) and b[s] (s = 2..n), index 0 unused."""
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    if n >= 2:
        a[1:n] = kernel.a_range(1, n - 1)
        b[2 : n + 1] = kernel.b_range(2, n)
    return a, b


def _counts_vector(cfg):
    x = np.zeros(cfg.n + 1, dtype=np.int64)
    for size, cnt in cfg.counts.items():
        x[size] = cnt
    return x


# ---------------------------------------------------------------------------
# compiled core


@njit(cache=True, nogil=True)
def _refill_tree(tree, p, x, rates, size_lo, size_hi):
    for j in range(p):
        size = size_lo + j
        tree[p + j] = rates[size] * x[size] if size <= size_hi else 0.0
    tree_rebuild(tree, p)


@njit(cache=True, nogil=True)
def _rates_now(x, a, f, tree_f, tree_b):
    r1 = a[1] * f * (x[1] * (x[1] - 1))
    fw = f * x[1] * tree_f[1]
    bw = tree_b[1]
    return r1, fw, bw


@njit(cache=True, nogil=True)
def _pick_channel(x, a, f, tree_f, p_f, tree_b, p_b, u):
    """Channel code: i > 0 forward at reaction i, -s backward at size s, 0 none."""
    r1, fw, bw = _rates_now(x, a, f, tree_f, tree_b)
    total = r1 + fw + bw
    if total <= 0.0:
        return 0
    target = u * total
    if target < r1:
        return 1
    target -= r1
    if target < fw and fw > 0.0:
        pos = tree_find(tree_f, p_f, target / (f * x[1]))
        if pos >= 0:
            return pos + 2
    else:
        target -= fw
        if bw > 0.0:
            pos = tree_find(tree_b, p_b, target)
            if pos >= 0:
                return -(pos + 2)
    # float rounding walked past the populated intervals: deterministic clamp
    if bw > 0.0:
        pos = tree_find(tree_b, p_b, bw)
        if pos >= 0:
            return -(pos + 2)
    if fw > 0.0:
        pos = tree_find(tree_f, p_f, tree_f[1])
        if pos >= 0:
            return pos + 2
    if r1 > 0.0:
        return 1
    return 0


@njit(cache=True, nogil=True)
def _apply_channel(x, a, b, tree_f, p_f, tree_b, p_b, channel, n):
    """Apply the jump, update the touched leaves.  Returns 0, or -1 on corruption."""
    if channel > 0:
        i = channel
        x[1] -= 1
        x[i] -= 1
        x[i + 1] += 1
        if x[1] < 0 or x[i] < 0 or i + 1 > n:
            return -1
        lo = i
    else:
        s = -channel
        x[s] -= 1
        x[s - 1] += 1
        x[1] += 1
        if x[s] < 0 or s < 2:
            return -1
        lo = s - 1
    for size in range(lo, lo + 2):
        if 2 <= size <= n - 1:
            tree_set(tree_f, p_f, size - 2, a[size] * x[size])
        if 2 <= size <= n:
            tree_set(tree_b, p_b, size - 2, b[size] * x[size])
    return 0


@njit(cache=True, nogil=True)
def _mcut_delta(channel, cutoff):
    if channel > 0:
        i = channel
        d = -1
        if i <= cutoff:
            d -= i
        if i + 1 <= cutoff:
            d += i + 1
    else:
        s = -channel
        d = 1
        if s <= cutoff:
            d -= s
        if s - 1 <= cutoff:
            d += s - 1
    return d


@njit(cache=True, nogil=True)
def _phi_delta(channel, phi):
    if channel > 0:
        i = channel
        return phi[i + 1] - phi[i] - phi[1]
    s = -channel
    return phi[s - 1] + phi[1] - phi[s]


@njit(cache=True, nogil=True)
def _record(out_conc, out_tail, out_phi, out_jumps, g, x, f, cutoff, m_cut, s_phi, use_phi, jumps, n):
    for j in range(cutoff):
        out_conc[g, j] = f * x[j + 1]
    out_tail[g] = f * (n - m_cut)
    if use_phi:
        out_phi[g] = f * s_phi
    out_jumps[g] = jumps


@njit(cache=True, nogil=True)
def _sum_mcut(x, n, cutoff):
    m = 0
    top = cutoff if cutoff < n else n
    for i in range(1, top + 1):
        m += i * x[i]
    return m


@njit(cache=True, nogil=True)
def _sum_phi(x, phi, n):
    s = 0.0
    for i in range(1, n + 1):
        if x[i] > 0:
            s += phi[i] * x[i]
    return s


@njit(cache=True, nogil=True)
def _run_core(x, a, b, f, n, tree_f, p_f, tree_b, p_b, rstate, grid, t_end,
              max_jumps, cutoff, phi, use_phi, out_conc, out_tail, out_phi,
              out_jumps, rebuild_every):
    """Returns (status, jumps, t): status 0 horizon, 1 absorbed, 2 jump budget, -1 corruption."""
    t = 0.0
    jumps = 0
    g = 0
    n_grid = grid.shape[0]
    m_cut = _sum_mcut(x, n, cutoff)
    s_phi = _sum_phi(x, phi, n) if use_phi else 0.0
    status = 0
    while True:
        r1, fw, bw = _rates_now(x, a, f, tree_f, tree_b)
        total = r1 + fw + bw
        if total <= 0.0:
            status = 1
            break
        dt = exponential(rstate, total)
        t_next = t + dt
        while g < n_grid and grid[g] < t_next:
            _record(out_conc, out_tail, out_phi, out_jumps, g, x, f, cutoff, m_cut, s_phi, use_phi, jumps, n)
            g += 1
        if t_next > t_end:
            break
        if max_jumps >= 0 and jumps >= max_jumps:
            status = 2
            break
        u = uniform(rstate)
        channel = _pick_channel(x, a, f, tree_f, p_f, tree_b, p_b, u)
        if channel == 0:
            status = 1
            break
        if _apply_channel(x, a, b, tree_f, p_f, tree_b, p_b, channel, n) != 0:
            status = -1
            break
        m_cut += _mcut_delta(channel, cutoff)
        if use_phi:
            s_phi += _phi_delta(channel, phi)
        jumps += 1
        t = t_next
        if rebuild_every > 0 and jumps % rebuild_every == 0:
            msum = 0
            for i in range(1, n + 1):
                msum += i * x[i]
            if msum != n:
                status = -1
                break
            _refill_tree(tree_f, p_f, x, a, 2, n - 1)
            _refill_tree(tree_b, p_b, x, b, 2, n)
            m_cut = _sum_mcut(x, n, cutoff)
            if use_phi:
                s_phi = _sum_phi(x, phi, n)
    while g < n_grid:
        _record(out_conc, out_tail, out_phi, out_jumps, g, x, f, cutoff, m_cut, s_phi, use_phi, jumps, n)
        g += 1
    return status, jumps, t


@njit(cache=True, nogil=True)
def _jump_log_core(x, a, b, f, n, tree_f, p_f, tree_b, p_b, rstate, n_jumps,
                   keys, dwells, channels, rebuild_every):
    """Log (state key, dwell, fired channel) per jump.  Returns jumps done (< n_jumps if absorbed)."""
    base = n + 1
    for k in range(n_jumps):
        key = 0
        pw = 1
        for i in range(1, n + 1):
            key += x[i] * pw
            pw *= base
        r1, fw, bw = _rates_now(x, a, f, tree_f, tree_b)
        total = r1 + fw + bw
        if total <= 0.0:
            return k
        dt = exponential(rstate, total)
        u = uniform(rstate)
        channel = _pick_channel(x, a, f, tree_f, p_f, tree_b, p_b, u)
        if channel == 0:
            return k
        if _apply_channel(x, a, b, tree_f, p_f, tree_b, p_b, channel, n) != 0:
            return -1
        keys[k] = key
        dwells[k] = dt
        channels[k] = channel
        if rebuild_every > 0 and (k + 1) % rebuild_every == 0:
            msum = 0
            for i in range(1, n + 1):
                msum += i * x[i]
            if msum != n:
                return -1
            _refill_tree(tree_f, p_f, x, a, 2, n - 1)
            _refill_tree(tree_b, p_b, x, b, 2, n)
    return n_jumps


# ---------------------------------------------------------------------------
# python-facing surface


@dataclass(frozen=True)
class Channel:
    """One reaction channel: kind 'forward' carries the reaction index i
    (attach a monomer to a size-i cluster), kind 'backward' carries the size
    s of the cluster shedding a monomer."""

    kind: str
    index: int
    rate: float


def channel_rates(cfg, kernel):
    """Active CTMC channels of a configuration, deterministic order."""
    n, rho = cfg.n, cfg.rho
    f = rho / n
    x1 = cfg.count(1)
    out = []
    if x1 >= 2 and n >= 2:
        out.append(Channel("forward", 1, kernel.a(1) * f * x1 * (x1 - 1)))
    if x1 >= 1:
        for size in sorted(cfg.counts):
            if 2 <= size <= n - 1:
                out.append(Channel("forward", size, kernel.a(size) * f * x1 * cfg.counts[size]))
    for size in sorted(cfg.counts):
        if size >= 2:
            out.append(Channel("backward", size, kernel.b(size) * cfg.counts[size]))
    return out


class PropensityIndex:
    """Channel-rate index of one evolving configuration.

    Holds the count vector, the two sum trees and the scalar factors; `apply`
    advances it by one channel with O(log n) leaf updates.
    """

    def __init__(self, cfg, kernel):
        self.n = cfg.n
        self.rho = cfg.rho
        self.f = cfg.rho / cfg.n
        self.kernel = kernel
        self.a, self.b = _rate_arrays(kernel, cfg.n)
        self.x = _counts_vector(cfg)
        self.p_f = capacity_for(max(cfg.n - 2, 1))
        self.p_b = capacity_for(max(cfg.n - 1, 1))
        self.tree_f = np.zeros(2 * self.p_f)
        self.tree_b = np.zeros(2 * self.p_b)
        self.rebuild()

    def rebuild(self):
        """Recompute every leaf and internal sum from the counts."""
        _refill_tree(self.tree_f, self.p_f, self.x, self.a, 2, self.n - 1)
        _refill_tree(self.tree_b, self.p_b, self.x, self.b, 2, self.n)

    def total_rate(self):
        r1, fw, bw = _rates_now(self.x, self.a, self.f, self.tree_f, self.tree_b)
        return float(r1 + fw + bw)

    def brute_force_total(self):
        """Total exit rate recomputed channel by channel (test oracle path)."""
        cfg = self.configuration()
        return sum(ch.rate for ch in channel_rates(cfg, self.kernel))

    def channel_rate(self, kind, index):
        if kind == "forward":
            if index == 1:
                return float(self.a[1] * self.f * (self.x[1] * (self.x[1] - 1)))
            return float(self.a[index] * self.f * self.x[1] * self.x[index])
        return float(self.b[index] * self.x[index])

    def pick(self, u):
        code = _pick_channel(self.x, self.a, self.f, self.tree_f, self.p_f,
                             self.tree_b, self.p_b, float(u))
        if code == 0:
            raise AbsorbingStateError("no feasible channel to pick")
        return int(code)

    def apply(self, code):
        status = _apply_channel(self.x, self.a, self.b, self.tree_f, self.p_f,
                                self.tree_b, self.p_b, code, self.n)
        if status != 0:
            raise SimulationCorruptionError(f"channel {code} infeasible in current counts")

    def configuration(self):
        counts = {int(i): int(c) for i, c in enumerate(self.x) if i >= 1 and c > 0}
        return state_mod.Configuration(self.n, self.rho, counts)


def step(cfg, index, rng_state):
    """One exact jump: waiting time ~ Exponential(total rate), channel chosen
    by tree descent, configuration advanced by the corresponding jump.

    `index` must represent `cfg`; it is advanced in place alongside the
    returned configuration.  Raises AbsorbingStateError at total rate zero.
    """
    total = index.total_rate()
    if total <= 0.0:
        raise AbsorbingStateError(f"configuration {dict(cfg.counts)} has no feasible reaction")
    dt = exponential(rng_state.state, total)
    u = uniform(rng_state.state)
    code = index.pick(u)
    index.apply(code)
    if code > 0:
        new_cfg = state_mod.apply_jump(cfg, code, "forward")
        fired = ("forward", code)
    else:
        size = -code
        new_cfg = state_mod.apply_jump(cfg, size - 1, "backward")
        fired = ("backward", size)
    return new_cfg, float(dt), fired


@dataclass(eq=False)
class Trajectory:
    """Grid-sampled observables of one exact path ("last state before or at t")."""

    times: np.ndarray
    conc: np.ndarray  # (grid, report_cutoff) concentrations c_1..c_cutoff
    tail_mass: np.ndarray  # mass in sizes above the report cutoff
    phi_moment: np.ndarray | None
    jumps: np.ndarray  # cumulative jump count at each grid time
    n: int
    rho: float
    seed: int
    stream: int
    report_cutoff: int
    total_jumps: int
    final_time: float
    absorbed: bool
    wall_seconds: float = field(compare=False)

    @property
    def mass(self):
        """Total mass per sample; exact by the integer invariant (verified in-run)."""
        return np.full(len(self.times), self.rho)


def simulate(cfg0, kernel, t_end, grid, seed, *, stream=0, report_cutoff=None,
             phi=None, max_jumps=None, rebuild_every=DEFAULT_REBUILD_EVERY):
    """Exact trajectory from cfg0, sampled at the given grid times.

    Deterministic given (seed, stream, inputs).  `phi` is an optional weight
    table phi[i], i = 1..n (index 0 ignored), tracked as sum_i phi(i) c_i.
    `max_jumps` stops after that many jumps (for stationary-law studies).
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if grid.size and (np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > t_end):
        raise ValueError("grid must be strictly increasing within [0, t_end]")
    n, rho = cfg0.n, cfg0.rho
    cutoff = min(report_cutoff or min(n, 100), n)
    a, b = _rate_arrays(kernel, n)
    x = _counts_vector(cfg0)
    p_f = capacity_for(max(n - 2, 1))
    p_b = capacity_for(max(n - 1, 1))
    tree_f = np.zeros(2 * p_f)
    tree_b = np.zeros(2 * p_b)
    _refill_tree(tree_f, p_f, x, a, 2, n - 1)
    _refill_tree(tree_b, p_b, x, b, 2, n)
    if phi is None:
        use_phi = False
        phi_arr = np.zeros(1)
    else:
        phi_arr = np.asarray(phi, dtype=np.float64)
        if phi_arr.shape[0] < n + 1:
            raise ValueError(f"phi table must cover sizes 1..{n}")
        use_phi = True
    rstate = stream_state(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), int(stream))
    out_conc = np.zeros((grid.size, cutoff))
    out_tail = np.zeros(grid.size)
    out_phi = np.zeros(grid.size)
    out_jumps = np.zeros(grid.size, dtype=np.int64)
    t0 = time.perf_counter()
    status, jumps, t_final = _run_core(
        x, a, b, rho / n, n, tree_f, p_f, tree_b, p_b, rstate, grid,
        float(t_end), -1 if max_jumps is None else int(max_jumps), cutoff,
        phi_arr, use_phi, out_conc, out_tail, out_phi, out_jumps,
        int(rebuild_every),
    )
    wall = time.perf_counter() - t0
    if status == -1:
        raise SimulationCorruptionError(
            "internal invariant violated during simulation (infeasible jump or mass drift)"
        )
    return Trajectory(
        times=grid, conc=out_conc, tail_mass=out_tail,
        phi_moment=out_phi if use_phi else None, jumps=out_jumps, n=n, rho=rho,
        seed=int(seed), stream=int(stream), report_cutoff=cutoff,
        total_jumps=int(jumps), final_time=float(t_final),
        absorbed=(status == 1), wall_seconds=wall,
    )


@dataclass(eq=False)
class EnsembleStats:
    """Streaming per-grid-point mean and unbiased variance over replicas."""

    times: np.ndarray
    replicas: int
    report_cutoff: int
    mean_conc: np.ndarray
    var_conc: np.ndarray
    mean_tail_mass: np.ndarray
    var_tail_mass: np.ndarray
    mean_phi_moment: np.ndarray | None
    var_phi_moment: np.ndarray | None
    rho: float

    @property
    def mean_mass(self):
        """Exact by conservation: every replica carries mass rho at all times."""
        return np.full(len(self.times), self.rho)

    @property
    def var_mass(self):
        return np.zeros(len(self.times))


def ensemble(cfg0, kernel, t_end, grid, m, master_seed, *, threads=1,
             report_cutoff=None, phi=None, rebuild_every=DEFAULT_REBUILD_EVERY):
    """Replica ensemble with independent streams (stream index = replica index).

    Replicas may run on a thread pool; the reduction is performed in replica
    order, so results are bit-identical for any thread count.
    """
    if m < 1:
        raise ValueError("replica count must be >= 1")

    def run_one(r):
        return simulate(cfg0, kernel, t_end, grid, master_seed, stream=r,
                        report_cutoff=report_cutoff, phi=phi,
                        rebuild_every=rebuild_every)

    if threads and threads > 1:
        pool = ThreadPoolExecutor(max_workers=threads)
        trajectories = pool.map(run_one, range(m))  # yields in submission order
    else:
        pool = None
        trajectories = map(run_one, range(m))

    count = 0
    mean_c = m2_c = mean_t = m2_t = mean_p = m2_p = None
    cutoff = None
    use_phi = phi is not None
    try:
        for traj in trajectories:
            if count == 0:
                cutoff = traj.report_cutoff
                mean_c = np.zeros_like(traj.conc)
                m2_c = np.zeros_like(traj.conc)
                mean_t = np.zeros_like(traj.tail_mass)
                m2_t = np.zeros_like(traj.tail_mass)
                if use_phi:
                    mean_p = np.zeros_like(traj.phi_moment)
                    m2_p = np.zeros_like(traj.phi_moment)
            count += 1
            for mean, m2, value in (
                (mean_c, m2_c, traj.conc),
                (mean_t, m2_t, traj.tail_mass),
            ) + (((mean_p, m2_p, traj.phi_moment),) if use_phi else ()):
                delta = value - mean
                mean += delta / count
                m2 += delta * (value - mean)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    if count > 1:
        var_c, var_t = m2_c / (count - 1), m2_t / (count - 1)
        var_p = m2_p / (count - 1) if use_phi else None
    else:
        var_c, var_t = np.zeros_like(mean_c), np.zeros_like(mean_t)
        var_p = np.zeros_like(mean_p) if use_phi else None
    return EnsembleStats(
        times=np.asarray(grid, dtype=np.float64), replicas=count,
        report_cutoff=cutoff, mean_conc=mean_c, var_conc=var_c,
        mean_tail_mass=mean_t, var_tail_mass=var_t,
        mean_phi_moment=mean_p if use_phi else None,
        var_phi_moment=var_p, rho=cfg0.rho,
    )


@dataclass(eq=False)
class JumpLog:
    """Per-jump record of the embedded chain: pre-jump state key, dwell, channel."""

    n: int
    rho: float
    keys: np.ndarray
    dwells: np.ndarray
    channels: np.ndarray
    absorbed: bool

    def occupancy(self, burn_in=0):
        """Time-weighted occupancy fractions by state key, after a jump burn-in."""
        keys = self.keys[burn_in:]
        dwells = self.dwells[burn_in:]
        uniq, inv = np.unique(keys, return_inverse=True)
        totals = np.bincount(inv, weights=dwells)
        return uniq, totals / totals.sum()


def state_key(counts, n):
    """Base-(n+1) packing of a counts mapping (matches JumpLog keys)."""
    key = 0
    for size, cnt in counts.items():
        key += cnt * (n + 1) ** (size - 1)
    return key


def run_jump_log(cfg0, kernel, n_jumps, seed, *, stream=0,
                 rebuild_every=DEFAULT_REBUILD_EVERY):
    """Run a fixed number of jumps, logging the embedded chain (n <= 15)."""
    n, rho = cfg0.n, cfg0.rho
    if n > _JUMP_LOG_MAX_N:
        raise ValueError(f"jump log packs states in int64, needs n <= {_JUMP_LOG_MAX_N}")
    a, b = _rate_arrays(kernel, n)
    x = _counts_vector(cfg0)
    p_f = capacity_for(max(n - 2, 1))
    p_b = capacity_for(max(n - 1, 1))
    tree_f = np.zeros(2 * p_f)
    tree_b = np.zeros(2 * p_b)
    _refill_tree(tree_f, p_f, x, a, 2, n - 1)
    _refill_tree(tree_b, p_b, x, b, 2, n)
    keys = np.zeros(n_jumps, dtype=np.int64)
    dwells = np.zeros(n_jumps)
    channels = np.zeros(n_jumps, dtype=np.int64)
    rstate = stream_state(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), int(stream))
    done = _jump_log_core(x, a, b, rho / n, n, tree_f, p_f, tree_b, p_b,
                          rstate, int(n_jumps), keys, dwells, channels,
                          int(rebuild_every))
    if done == -1:
        raise SimulationCorruptionError("internal invariant violated during jump log")
    done = int(done)
    return JumpLog(n=n, rho=rho, keys=keys[:done], dwells=dwells[:done],
                   channels=channels[:done], absorbed=(done < n_jumps))
