"""Experiment drivers: scaling-limit, stationary-potential and moment studies.

Each driver takes an ExperimentConfig, fans independent (n, replica) work
items over a thread pool, and reduces in a fixed order so results are byte
identical for any worker count.  Emission writes plot-ready long-format CSV
plus a JSON run manifest (config, hash, seed, versions, declared regime).
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TruncationInadequateError
from .kernels import activity_for_mass, critical_activity, critical_mass, equilibrium_profile
from .ode import IntegratorConfig, integrate, truncation_tail_mass
from .ssa import simulate
from .state import Configuration, from_monomers
from .stationary import nonequilibrium_potential, relative_entropy, stationary_table
from .weights import build_superlinear_weight, thresholds_from_tail_masses

ODE_TAIL_LIMIT = 1e-8


# ---------------------------------------------------------------------------
# scaling-limit study (expected sup-distance to the deterministic solution)


@dataclass(eq=False)
class LlnResult:
    n_grid: tuple
    estimates: np.ndarray  # mean over replicas of sup_t distance
    standard_errors: np.ndarray
    replicas: int
    horizon: float
    truncation: int
    distances: list = field(repr=False)  # per-n arrays of per-replica sups

    def rows(self):
        for n, est, se in zip(self.n_grid, self.estimates, self.standard_errors):
            yield {"n": n, "estimate": float(est), "standard_error": float(se)}


def _sup_distance(traj, reference_conc, size_weights):
    """Per-replica sup over the grid of the mass-weighted l1 distance.

    The sum is truncated at the reference truncation; simulated mass above
    the report cutoff and reference mass above the simulated support both
    count toward the distance, so the comparison happens on a common
    support with accounted error.
    """
    width = traj.conc.shape[1]
    diff = np.abs(traj.conc - reference_conc[:, :width]) @ size_weights[:width]
    if width < reference_conc.shape[1]:
        diff = diff + reference_conc[:, width:] @ size_weights[width:]
    diff = diff + traj.tail_mass
    return float(diff.max())


def lln_experiment(cfg):
    """Distance between simulated paths and the deterministic solution per n.

    Grid-max approximates the path supremum from below (documented); the
    initial data is monomeric for every n, so the distance starts at zero.
    """
    kernel = cfg.kernel()
    grid = np.linspace(0.0, cfg.horizon, cfg.grid_points)
    truncation = cfg.truncation
    reference = integrate(
        np.array([cfg.rho]), kernel, cfg.horizon,
        IntegratorConfig(truncation=truncation), grid=grid,
    )
    leaked = truncation_tail_mass(reference)
    if leaked > ODE_TAIL_LIMIT:
        raise TruncationInadequateError(truncation, leaked)
    size_weights = np.arange(1, truncation + 1, dtype=np.float64)

    estimates, errors, all_distances = [], [], []
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for n_index, n in enumerate(cfg.n_grid):
            cfg0 = from_monomers(n, cfg.rho)

            def run_one(replica, _cfg0=cfg0, _base=n_index * cfg.replicas):
                traj = simulate(_cfg0, kernel, cfg.horizon, grid, cfg.seed,
                                stream=_base + replica, report_cutoff=truncation)
                return _sup_distance(traj, reference.conc, size_weights)

            distances = np.fromiter(
                pool.map(run_one, range(cfg.replicas)), dtype=np.float64,
                count=cfg.replicas,
            )
            estimates.append(distances.mean())
            errors.append(distances.std(ddof=1) / math.sqrt(cfg.replicas)
                          if cfg.replicas > 1 else 0.0)
            all_distances.append(distances)
    return LlnResult(
        n_grid=cfg.n_grid, estimates=np.array(estimates),
        standard_errors=np.array(errors), replicas=cfg.replicas,
        horizon=cfg.horizon, truncation=truncation, distances=all_distances,
    )


# ---------------------------------------------------------------------------
# stationary-potential study


def floor_configuration(profile, n, rho, remainder="cluster"):
    """Fixed-mass configuration approximating a concentration profile.

    Counts are floor((n/rho) c_i) for i <= n-1; the leftover integer mass
    keeps the state in the space exactly, placed either as one cluster of
    that size (``remainder="cluster"``, the escape-to-large-sizes embedding
    needed for supercritical profiles) or as monomers
    (``remainder="monomers"``, which stays strongly convergent for
    mass-rho profiles and avoids the rounding lumps a single improbable
    medium-size cluster adds to the potential).  Requires the profile mass
    not to exceed rho.
    """
    profile = np.asarray(profile, dtype=np.float64)
    head = profile[: n - 1] if profile.size >= n - 1 else profile
    weights = np.arange(1, head.size + 1)
    if float(weights @ head) > rho * (1 + 1e-12):
        raise ValueError("profile mass exceeds rho; cannot embed in the state space")
    counts = {}
    scale = n / rho
    for i, c in enumerate(head, start=1):
        k = int(math.floor(scale * c))
        if k > 0:
            counts[i] = k
    leftover = n - sum(i * k for i, k in counts.items())
    if leftover > 0:
        if remainder == "cluster":
            counts[leftover] = counts.get(leftover, 0) + 1
        elif remainder == "monomers":
            counts[1] = counts.get(1, 0) + leftover
        else:
            raise ValueError(f"remainder policy must be 'cluster' or 'monomers', got {remainder!r}")
    return Configuration(n, rho, counts)


@dataclass(eq=False)
class PotentialResult:
    n_grid: tuple
    potentials: np.ndarray
    entropy_target: float
    gaps: np.ndarray
    z_star: float
    critical_activity: float
    critical_mass: float  # inf when the mass series diverges
    regime: str  # "subcritical" or "supercritical"
    target: str

    def rows(self):
        for n, pot, gap in zip(self.n_grid, self.potentials, self.gaps):
            yield {"n": n, "potential": float(pot),
                   "entropy_target": self.entropy_target, "gap": float(gap)}


def potential_experiment(cfg):
    """Exact potential of embedded target states against the entropy limit.

    Subcritical masses use the activity matching rho, with floor rounding
    returned to the monomer pool (strongly convergent embedding).
    Supercritical masses use the critical activity and park the excess mass
    in one large remainder cluster, so the embedding converges only
    componentwise and the potential still approaches the entropy target.
    """
    kernel = cfg.kernel()
    zs = critical_activity(kernel).value
    cm = critical_mass(kernel, zs, tol=1e-10)
    if cm.diverged or cfg.rho <= cm.value + 1e-10:
        regime = "subcritical"
        z_star = activity_for_mass(kernel, cfg.rho, tol=1e-10, zs=zs)
    else:
        regime = "supercritical"
        z_star = zs

    max_n = max(cfg.n_grid)
    profile = equilibrium_profile(kernel, z_star, max(max_n - 1, 1))
    if cfg.target == "equilibrium":
        target_profile = profile.coefficients
        entropy_target = 0.0
    else:  # monomer
        target_profile = np.array([cfg.rho])
        entropy_target = relative_entropy(target_profile, kernel, z_star)

    remainder = "cluster" if regime == "supercritical" else "monomers"
    potentials = []
    for n in cfg.n_grid:
        embedded = floor_configuration(target_profile, n, cfg.rho, remainder=remainder)
        table = stationary_table(n, cfg.rho, kernel, z_star)
        potentials.append(nonequilibrium_potential(embedded, table))
    potentials = np.array(potentials)
    return PotentialResult(
        n_grid=cfg.n_grid, potentials=potentials,
        entropy_target=float(entropy_target),
        gaps=np.abs(potentials - entropy_target), z_star=float(z_star),
        critical_activity=float(zs),
        critical_mass=float("inf") if cm.diverged else float(cm.value),
        regime=regime, target=cfg.target,
    )


# ---------------------------------------------------------------------------
# superlinear-moment study


@dataclass(eq=False)
class MomentResult:
    n_grid: tuple
    times: np.ndarray
    mean_series: list  # per n: ensemble mean of sum_i phi(i) c_i(t)
    max_of_mean: np.ndarray  # per n: max over the grid of the mean series
    mean_of_sup: np.ndarray  # per n: mean over replicas of sup_t moment
    thresholds: tuple
    replicas: int

    @property
    def spread_factor(self):
        """max/min of the per-n moment maxima; bounded-in-n means O(1)."""
        return float(self.max_of_mean.max() / self.max_of_mean.min())

    def rows(self):
        for idx, n in enumerate(self.n_grid):
            for t, v in zip(self.times, self.mean_series[idx]):
                yield {"n": n, "t": float(t), "phi_moment_mean": float(v)}


def moment_experiment(cfg, weight=None):
    """Ensemble phi-moment time series per n; bounded across the n grid.

    The weight defaults to the construction driven by the initial family
    itself (monomeric data for every n in the grid).
    """
    kernel = cfg.kernel()
    grid = np.linspace(0.0, cfg.horizon, cfg.grid_points)
    if weight is None:
        if cfg.moment_thresholds is not None:
            weight = build_superlinear_weight(cfg.moment_thresholds)
        else:
            initial = [np.array([cfg.rho])] * len(cfg.n_grid)
            weight = build_superlinear_weight(
                thresholds_from_tail_masses(initial, n_bands=cfg.moment_bands)
            )
    mean_series, max_of_mean, mean_of_sup = [], [], []
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for n_index, n in enumerate(cfg.n_grid):
            cfg0 = from_monomers(n, cfg.rho)
            phi = weight.values_table(n)

            def run_one(replica, _cfg0=cfg0, _phi=phi, _base=n_index * cfg.replicas):
                traj = simulate(_cfg0, kernel, cfg.horizon, grid, cfg.seed,
                                stream=_base + replica, report_cutoff=1, phi=_phi)
                return traj.phi_moment

            moments = np.stack(list(pool.map(run_one, range(cfg.replicas))))
            mean = moments.mean(axis=0)
            mean_series.append(mean)
            max_of_mean.append(float(mean.max()))
            mean_of_sup.append(float(moments.max(axis=1).mean()))
    return MomentResult(
        n_grid=cfg.n_grid, times=grid, mean_series=mean_series,
        max_of_mean=np.array(max_of_mean), mean_of_sup=np.array(mean_of_sup),
        thresholds=tuple(weight.thresholds), replicas=cfg.replicas,
    )


# ---------------------------------------------------------------------------
# emission


def write_csv(path, rows, columns):
    """Deterministic CSV: fixed column order, shortest round-trip floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return path


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def run_manifest(cfg, kind, extra=None, wall_seconds=None, workers=None):
    import numpy
    import scipy

    manifest = {
        "kind": kind,
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "seed_defaulted": cfg.seed_defaulted,
        "declared_regime": cfg.regime,
        "versions": {
            "bdkinetics": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
        "workers": workers if workers is not None else cfg.threads,
    }
    if wall_seconds is not None:
        manifest["wall_seconds"] = wall_seconds
    if extra:
        manifest.update(extra)
    return manifest


def emit_results(out_dir, kind, cfg, result, wall_seconds=None):
    """Write the driver's CSV tables and the JSON run manifest; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    extra = {}
    if kind == "lln":
        paths.append(write_csv(out / "lln.csv", result.rows(),
                               ["n", "estimate", "standard_error"]))
    elif kind == "potential":
        paths.append(write_csv(out / "potential.csv", result.rows(),
                               ["n", "potential", "entropy_target", "gap"]))
        extra = {"z_star": result.z_star, "critical_activity": result.critical_activity,
                 "critical_mass": result.critical_mass, "computed_regime": result.regime}
    elif kind == "moment":
        paths.append(write_csv(out / "moment.csv", result.rows(),
                               ["n", "t", "phi_moment_mean"]))
        paths.append(write_csv(
            out / "moment_summary.csv",
            ({"n": n, "max_of_mean": float(a), "mean_of_sup": float(b)}
             for n, a, b in zip(result.n_grid, result.max_of_mean, result.mean_of_sup)),
            ["n", "max_of_mean", "mean_of_sup"],
        ))
        extra = {"thresholds": list(result.thresholds),
                 "spread_factor": result.spread_factor}
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    manifest = run_manifest(cfg, kind, extra=extra, wall_seconds=wall_seconds)
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(manifest_path)
    return paths


def run_experiment(cfg, kind=None):
    """Dispatch one driver and emit its results; returns (result, paths)."""
    kind = kind or cfg.kind
    if kind not in ("lln", "potential", "moment"):
        raise ValueError(f"unknown experiment kind {kind!r}")
    t0 = time.perf_counter()
    if kind == "lln":
        result = lln_experiment(cfg)
    elif kind == "potential":
        result = potential_experiment(cfg)
    else:
        result = moment_experiment(cfg)
    wall = time.perf_counter() - t0
    paths = emit_results(cfg.out_dir, kind, cfg, result, wall_seconds=wall)
    return result, paths
