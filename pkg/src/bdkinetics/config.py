"""Experiment configuration: a human-editable YAML file with a nested kernel section.

Unknown keys, wrong types, and bad values are reported with their field
path; YAML syntax errors carry the line number.  Missing optional fields
take the documented defaults below and are echoed into the run manifest.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import ConfigError
from .kernels import kernel_from_dict, kernel_to_dict

DEFAULT_SEED = 12345
EXPERIMENT_KINDS = ("lln", "potential", "moment")
TARGETS = ("equilibrium", "monomer")
REGIMES = ("auto", "subcritical", "supercritical")


@dataclass
class ExperimentConfig:
    """All knobs of the experiment drivers and single-run commands."""

    kernel_spec: dict = field(default_factory=lambda: {"family": "constant", "params": {"a": 1.0, "b": 1.0}})
    rho: float = 1.0
    kind: str | None = None
    n: int | None = None  # single-run commands
    n_grid: tuple = (100, 1000, 10000)
    replicas: int = 200
    horizon: float = 5.0
    grid_points: int = 101
    truncation: int = 80
    report_cutoff: int | None = None
    seed: int = DEFAULT_SEED
    seed_defaulted: bool = False
    threads: int = 1
    out_dir: str = "results"
    z: float | None = None
    target: str = "equilibrium"
    regime: str = "auto"
    moment_thresholds: tuple | None = None
    moment_bands: int = 6

    def kernel(self):
        return kernel_from_dict(self.kernel_spec)

    def to_dict(self):
        d = asdict(self)
        d["kernel"] = d.pop("kernel_spec")
        d["n_grid"] = list(self.n_grid)
        if self.moment_thresholds is not None:
            d["moment_thresholds"] = list(self.moment_thresholds)
        d.pop("seed_defaulted")
        return d

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    def sha256(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _require(cond, message, field_name):
    if not cond:
        raise ConfigError(message, field=field_name)


def _coerce(raw, caster, field_name, type_name):
    try:
        return caster(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected {type_name}, got {raw!r}", field=field_name) from exc


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    known = ({f.name for f in fields(ExperimentConfig)} | {"kernel"}) - {"kernel_spec", "seed_defaulted"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", field=key)

    cfg = ExperimentConfig()
    if "kernel" in data:
        cfg.kernel_spec = kernel_to_dict(kernel_from_dict(data["kernel"]))
    if "kind" in data and data["kind"] is not None:
        _require(data["kind"] in EXPERIMENT_KINDS,
                 f"kind must be one of {EXPERIMENT_KINDS}, got {data['kind']!r}", "kind")
        cfg.kind = data["kind"]
    cfg.rho = _coerce(data.get("rho", cfg.rho), float, "rho", "a number")
    _require(cfg.rho > 0, f"rho must be positive, got {cfg.rho}", "rho")
    if data.get("n") is not None:
        cfg.n = _coerce(data["n"], int, "n", "an integer")
        _require(cfg.n >= 1, f"n must be >= 1, got {cfg.n}", "n")
    if "n_grid" in data:
        raw = data["n_grid"]
        _require(isinstance(raw, (list, tuple)) and raw, "n_grid must be a nonempty list", "n_grid")
        grid = tuple(_coerce(v, int, "n_grid", "integers") for v in raw)
        _require(all(v >= 1 for v in grid), "n_grid entries must be >= 1", "n_grid")
        _require(all(b > a for a, b in zip(grid, grid[1:])), "n_grid must be increasing", "n_grid")
        cfg.n_grid = grid
    cfg.replicas = _coerce(data.get("replicas", cfg.replicas), int, "replicas", "an integer")
    _require(cfg.replicas >= 1, "replicas must be >= 1", "replicas")
    cfg.horizon = _coerce(data.get("horizon", cfg.horizon), float, "horizon", "a number")
    _require(cfg.horizon > 0, "horizon must be positive", "horizon")
    cfg.grid_points = _coerce(data.get("grid_points", cfg.grid_points), int, "grid_points", "an integer")
    _require(cfg.grid_points >= 2, "grid_points must be >= 2", "grid_points")
    cfg.truncation = _coerce(data.get("truncation", cfg.truncation), int, "truncation", "an integer")
    _require(cfg.truncation >= 2, "truncation must be >= 2", "truncation")
    if data.get("report_cutoff") is not None:
        cfg.report_cutoff = _coerce(data["report_cutoff"], int, "report_cutoff", "an integer")
        _require(cfg.report_cutoff >= 1, "report_cutoff must be >= 1", "report_cutoff")
    if data.get("seed") is not None:
        cfg.seed = _coerce(data["seed"], int, "seed", "an integer")
    else:
        cfg.seed = DEFAULT_SEED
        cfg.seed_defaulted = True
    cfg.threads = _coerce(data.get("threads", cfg.threads), int, "threads", "an integer")
    _require(cfg.threads >= 1, "threads must be >= 1", "threads")
    cfg.out_dir = str(data.get("out_dir", cfg.out_dir))
    if data.get("z") is not None:
        cfg.z = _coerce(data["z"], float, "z", "a number")
        _require(cfg.z > 0, "z must be positive", "z")
    cfg.target = str(data.get("target", cfg.target))
    _require(cfg.target in TARGETS, f"target must be one of {TARGETS}, got {cfg.target!r}", "target")
    cfg.regime = str(data.get("regime", cfg.regime))
    _require(cfg.regime in REGIMES, f"regime must be one of {REGIMES}, got {cfg.regime!r}", "regime")
    if data.get("moment_thresholds") is not None:
        raw = data["moment_thresholds"]
        _require(isinstance(raw, (list, tuple)) and raw, "moment_thresholds must be a nonempty list", "moment_thresholds")
        cfg.moment_thresholds = tuple(_coerce(v, int, "moment_thresholds", "integers") for v in raw)
    cfg.moment_bands = _coerce(data.get("moment_bands", cfg.moment_bands), int, "moment_bands", "an integer")
    _require(cfg.moment_bands >= 1, "moment_bands must be >= 1", "moment_bands")
    return cfg


def load_config(path):
    """Parse and validate a YAML experiment configuration."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line=line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    if data is None:
        data = {}
    return config_from_dict(data)
