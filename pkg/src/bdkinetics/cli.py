"""Command-line interface.

Subcommands: equilibrium, simulate, ode, stationary, lln, potential, moment.
Shared flags: --config, --seed, --out, --threads.  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 enumeration cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import (
    BdkError,
    ConfigError,
    DivergentReferenceError,
    IntegrationFailureError,
    InternalInconsistencyError,
    SeriesCertificationError,
    SimulationCorruptionError,
    StateSpaceTooLargeError,
    StiffnessError,
    SupercriticalMassError,
    TruncationInadequateError,
)
from .experiments import run_experiment, run_manifest, write_csv
from .kernels import (
    activity_for_mass,
    critical_activity,
    critical_mass,
    equilibrium_profile,
    kernel_from_dict,
)
from .ode import IntegratorConfig, integrate
from .ssa import simulate
from .state import format_counts, from_monomers
from .stationary import nonequilibrium_potential, stationary_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CAP = 4

_NUMERICAL_ERRORS = (
    SupercriticalMassError,
    SeriesCertificationError,
    DivergentReferenceError,
    StiffnessError,
    IntegrationFailureError,
    SimulationCorruptionError,
    InternalInconsistencyError,
    TruncationInadequateError,
)


def parse_kernel_spec(text):
    """Parse 'family:key=value,key=value' (e.g. 'constant:a=1,b=1', 'power_law:q=4')."""
    family, _, rest = text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ConfigError(f"malformed kernel parameter {item!r}, expected key=value",
                                  field="kernel")
            try:
                params[key.strip()] = float(value)
            except ValueError as exc:
                raise ConfigError(f"kernel parameter {key!r} must be a number, got {value!r}",
                                  field="kernel") from exc
    return kernel_from_dict({"family": family.strip(), "params": params})


def _load(args, require=False):
    if args.config:
        cfg = load_config(args.config)
    elif require:
        raise ConfigError("this command needs --config")
    else:
        cfg = ExperimentConfig()
        cfg.seed_defaulted = True
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.seed_defaulted = False
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if getattr(args, "replicas", None) is not None:
        cfg.replicas = args.replicas
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    return cfg


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_equilibrium(args):
    cfg = _load(args, require=True)
    kernel = cfg.kernel()
    estimate = critical_activity(kernel)
    cm = critical_mass(kernel, estimate.value, tol=1e-10) if estimate.value > 0 else None
    z = cfg.z
    z_of_rho = None
    if z is None:
        try:
            z_of_rho = activity_for_mass(kernel, cfg.rho, tol=1e-10, zs=estimate.value)
            z = z_of_rho
        except SupercriticalMassError:
            z = estimate.value
    profile = equilibrium_profile(kernel, z, cfg.truncation)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "equilibrium.csv",
              ({"i": i + 1, "c_i": float(c)} for i, c in enumerate(profile.coefficients)),
              ["i", "c_i"])
    diag_path = write_csv(
        out / "activity_diagnostics.csv",
        ({"i": i + 1, "log_q_over_i": float(v)} for i, v in enumerate(estimate.diagnostics)),
        ["i", "log_q_over_i"])
    _write_json(out / "equilibrium.json", {
        "kernel": cfg.kernel_spec,
        "critical_activity": estimate.value,
        "critical_activity_source": estimate.source,
        "critical_mass": None if cm is None or cm.diverged else cm.value,
        "critical_mass_diverged": None if cm is None else cm.diverged,
        "z": z,
        "z_of_rho": z_of_rho,
        "rho": cfg.rho,
        "profile_mass": profile.mass,
        "profile_mass_tail_bound": None if math.isinf(profile.mass_tail_bound) else profile.mass_tail_bound,
    })
    print(f"wrote {out / 'equilibrium.csv'}, {diag_path}, {out / 'equilibrium.json'}")
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load(args, require=True)
    kernel = cfg.kernel()
    n = cfg.n or cfg.n_grid[0]
    cfg0 = from_monomers(n, cfg.rho)
    grid = np.linspace(0.0, cfg.horizon, cfg.grid_points)
    cutoff = cfg.report_cutoff or min(n, 100)
    out_path = Path(args.out or (Path(cfg.out_dir) / "results.csv"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    trajectories = [
        simulate(cfg0, kernel, cfg.horizon, grid, cfg.seed, stream=r, report_cutoff=cutoff)
        for r in range(cfg.replicas)
    ]
    wall = time.perf_counter() - t0

    def rows():
        for r, traj in enumerate(trajectories):
            for gi, t in enumerate(traj.times):
                for i in range(cutoff):
                    yield {"replica": r, "t": float(t), "i": i + 1,
                           "c_i": float(traj.conc[gi, i])}

    write_csv(out_path, rows(), ["replica", "t", "i", "c_i"])
    summary = {
        "n": n, "rho": cfg.rho, "kernel": cfg.kernel_spec, "seed": cfg.seed,
        "jump_count": [traj.total_jumps for traj in trajectories],
        "total_jumps": sum(traj.total_jumps for traj in trajectories),
        "wall_seconds": wall,
    }
    _write_json(out_path.with_suffix(".json"), summary)
    print(f"wrote {out_path} and {out_path.with_suffix('.json')}")
    return EXIT_OK


def cmd_ode(args):
    cfg = _load(args, require=True)
    kernel = cfg.kernel()
    truncation = args.truncation or cfg.truncation
    grid = np.linspace(0.0, cfg.horizon, cfg.grid_points)
    solution = integrate(np.array([cfg.rho]), kernel, cfg.horizon,
                         IntegratorConfig(truncation=truncation), grid=grid)
    out_path = Path(args.out or (Path(cfg.out_dir) / "ode.csv"))
    out_path.parent.mkdir(parents=True, exist_ok=True)

    def rows():
        for gi, t in enumerate(solution.times):
            for i in range(truncation):
                yield {"t": float(t), "i": i + 1, "c_i": float(solution.conc[gi, i])}

    write_csv(out_path, rows(), ["t", "i", "c_i"])
    _write_json(out_path.with_suffix(".json"), {
        "kernel": cfg.kernel_spec, "rho": cfg.rho, "truncation": truncation,
        "horizon": cfg.horizon, "mass_initial": solution.mass_initial,
        "mass_drift": solution.mass_drift, **solution.stats,
    })
    print(f"wrote {out_path} and {out_path.with_suffix('.json')}")
    return EXIT_OK


def cmd_stationary(args):
    if args.kernel:
        kernel = parse_kernel_spec(args.kernel)
        kernel_desc = args.kernel
    else:
        cfg = _load(args, require=True)
        kernel = cfg.kernel()
        kernel_desc = cfg.kernel_spec
    n = args.n
    rho = args.rho
    z = args.z
    table = stationary_table(n, rho, kernel, z)
    out_path = Path(args.out or "table.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)

    def rows():
        for idx in range(len(table)):
            cfg_state = table.configuration(idx)
            yield {
                "state": format_counts(cfg_state.counts),
                "log_weight": float(table.log_weights[idx]),
                "probability": float(table.probabilities[idx]),
                "potential": nonequilibrium_potential(cfg_state, table),
            }

    write_csv(out_path, rows(), ["state", "log_weight", "probability", "potential"])
    _write_json(out_path.with_suffix(".json"), {
        "log_Bn": table.log_normalizer, "z": z, "n": n, "rho": rho,
        "p_n": len(table), "kernel": kernel_desc,
    })
    print(f"wrote {out_path} and {out_path.with_suffix('.json')}")
    return EXIT_OK


def cmd_experiment(kind):
    def run(args):
        cfg = _load(args, require=True)
        result, paths = run_experiment(cfg, kind=kind)
        for p in paths:
            print(f"wrote {p}")
        return EXIT_OK

    return run


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bdk",
        description="Cluster-growth kinetics: exact simulation, deterministic "
                    "integration, stationary analysis, convergence experiments.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--replicas", type=int, help="override replica count")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", parents=[common],
                   help="equilibrium profile and critical-activity diagnostics").set_defaults(fn=cmd_equilibrium)
    sub.add_parser("simulate", parents=[common],
                   help="exact stochastic trajectories").set_defaults(fn=cmd_simulate)
    p_ode = sub.add_parser("ode", parents=[common], help="deterministic truncated integration")
    p_ode.add_argument("--truncation", type=int, help="truncation size I")
    p_ode.set_defaults(fn=cmd_ode)
    p_st = sub.add_parser("stationary", parents=[common], help="exact stationary table")
    p_st.add_argument("--n", type=int, required=True)
    p_st.add_argument("--rho", type=float, default=1.0)
    p_st.add_argument("--kernel", help="inline kernel, e.g. 'constant:a=1,b=1' or 'power_law:q=4'")
    p_st.add_argument("--z", type=float, default=1.0)
    p_st.set_defaults(fn=cmd_stationary)
    for kind, blurb in (("lln", "sup-distance to the deterministic solution over n"),
                        ("potential", "stationary potential vs entropy target over n"),
                        ("moment", "superlinear moment boundedness over n")):
        sub.add_parser(kind, parents=[common], help=blurb).set_defaults(fn=cmd_experiment(kind))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StateSpaceTooLargeError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BdkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
