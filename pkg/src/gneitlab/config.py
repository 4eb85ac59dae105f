"""Experiment configuration (schema 1) with fail-fast validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .covariance import covariance_from_json
from .errors import ConfigError, GneitlabError
from .geometry import WindowSpec
from .hermite import functional_from_json

SCHEMA_VERSION = 1
_KEYS = {"schema", "covariance", "window", "functional", "t_ladder", "n_reps", "master_seed",
         "budgets", "output_dir"}
BUDGET_DEFAULTS = {
    "h": 1.0,            # grid mesh
    "eps_clip": 1e-3,    # admissible discarded spectral mass
    "mc_points": 200_000,
    "k": 3,              # cycle length for separability / appendix suites
    "slope_tol": 0.25,
    "ks_alpha": 0.01,
    "z_max": 4.0,
    "kappa3_rel_tol": 0.25,
    "kappa3_sep": 5.0,
    "appendix_gap": 0.10,
    "threads": 0,        # 0 = hardware default
}


@dataclass
class ExperimentConfig:
    covariance: object
    window: WindowSpec
    functional: object
    t_ladder: list
    n_reps: int
    master_seed: int
    budgets: dict = field(default_factory=dict)
    output_dir: str = "."
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def budget(self, name):
        return self.budgets.get(name, BUDGET_DEFAULTS[name])


def parse_config(obj):
    """Validate every sub-spec before anything is simulated."""
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(obj) - _KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if obj.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config schema must be {SCHEMA_VERSION}")
    missing = {"covariance", "window", "functional"} - set(obj)
    if missing:
        raise ConfigError(f"config missing keys: {sorted(missing)}")
    try:
        cov = covariance_from_json(obj["covariance"])
        window = WindowSpec.from_json(obj["window"])
        window.check_dims(cov)
        phi = functional_from_json(obj["functional"])
    except (GneitlabError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sub-spec: {exc}") from exc
    budgets = dict(obj.get("budgets", {}))
    unknown = set(budgets) - set(BUDGET_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown budget keys: {sorted(unknown)}")
    ladder = [float(t) for t in obj.get("t_ladder", [])]
    if any(t <= 0 for t in ladder):
        raise ConfigError("t_ladder entries must be positive")
    n_reps = obj.get("n_reps", 200)
    seed = obj.get("master_seed", 0)
    if not isinstance(n_reps, int) or n_reps < 2:
        raise ConfigError("n_reps must be an integer >= 2")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("master_seed must be a nonnegative integer")
    return ExperimentConfig(cov, window, phi, ladder, n_reps, seed, budgets,
                            str(obj.get("output_dir", ".")), obj)


def load_config(path):
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(obj)
