"""Run configuration: a YAML key/value tree with dotted-path overrides.

Unknown keys are rejected by name. ``config_hash`` covers every setting that
can change a result; the run seed, output directory and job count are kept
out of it and recorded next to it instead.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .agent import PrimalDualQAgent
from .channel import ChannelConfig
from .exceptions import ConfigError
from .metrics import ERROR_MODES
from .predictor import METHODS
from .trajectory import TrajectoryConfig
from .validation import check_member, check_positive_int, check_probability

DEFAULTS = {
    "seed": 0,
    "output_dir": "runs",
    "jobs": 1,
    "e_max": 0.007,
    "error_mode": "mse",
    "trajectory": {
        "kind": "sinusoid_mix",
        "n_components": 4,
        "amplitude_deg": [4.0, 8.0],
        "frequency_hz": [0.05, 0.4],
        "n_waypoints": 20,
        "dwell_ms": 200,
        "waypoint_deg": [-60.0, 60.0],
        "waypoints": None,
        "path": None,
    },
    "channel": {"p_loss": 0.0, "base_delay_ms": 10, "jitter_ms": 5},
    "predictor": {"method": "LINEAR", "ar_order": 4, "window": 32, "ridge": 1e-8},
    "sim": {"epoch_ms": 100, "episode_ms": 30_000, "warmup_ms": 500},
    "agent": {
        "gamma": 0.9,
        "alpha": 0.1,
        "alpha_schedule": "constant",
        "epsilon_start": 0.5,
        "epsilon_end": 0.02,
        "kappa": 50.0,
        "lambda0": 1.0,
        "lambda_max": 1e4,
        "mse_cap": 10.0,
        "n_episodes": 500,
        "select_window": 50,
        "select_every": 10,
        "n_validation": 20,
        "dual_margin": 0.1,
        "dual_signal": "greedy_mse",
        "dual_burnin": 0,
        "q_mode": "split",
    },
    "eval": {"n_episodes": 20},
    "sweep": {
        "p_loss": [0.0, 0.1],
        "n_episodes": 20,
        "budgets": [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 7e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
    },
}

_UNHASHED = ("seed", "output_dir", "jobs")


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key: {dotted}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {dotted} must be a mapping")
            out[key] = _merge(base[key], value, dotted + ".")
        else:
            out[key] = value
    return out


def apply_override(tree, assignment):
    """Apply ``"a.b.c=value"``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.strip().split(".")
    node = tree
    for depth, key in enumerate(keys):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"unknown config key: {'.'.join(keys[: depth + 1])}")
        if depth == len(keys) - 1:
            node[key] = yaml.safe_load(raw)
        else:
            node = node[key]
    return tree


@dataclass(frozen=True)
class RunConfig:
    tree: dict

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_dict(cls, data=None, overrides=()):
        tree = _merge(DEFAULTS, data or {})
        for item in overrides:
            apply_override(tree, item)
        cfg = cls(tree)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path=None, overrides=()):
        data = {}
        if path is not None:
            try:
                data = yaml.safe_load(Path(path).read_text()) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path} must hold a mapping at top level")
        return cls.from_dict(data, overrides)

    def replace(self, *overrides):
        tree = copy.deepcopy(self.tree)
        for item in overrides:
            apply_override(tree, item)
        cfg = RunConfig(tree)
        cfg.validate()
        return cfg

    def validate(self):
        t = self.tree
        check_member(t["error_mode"], ERROR_MODES, "error_mode")
        if not float(t["e_max"]) >= 0:
            raise ConfigError("e_max must be non-negative")
        check_positive_int(t["jobs"], "jobs")
        sim = t["sim"]
        epoch = check_positive_int(sim["epoch_ms"], "sim.epoch_ms")
        if epoch % 100:
            raise ConfigError("sim.epoch_ms must be a multiple of 100 so every rate divides it")
        for key in ("episode_ms", "warmup_ms"):
            if sim[key] % epoch:
                raise ConfigError(f"sim.{key} must be a multiple of sim.epoch_ms")
        if sim["episode_ms"] < 1000:
            raise ConfigError("sim.episode_ms must be >= 1000")
        if sim["warmup_ms"] >= sim["episode_ms"]:
            raise ConfigError("sim.warmup_ms must be shorter than the episode")
        check_member(t["predictor"]["method"], METHODS, "predictor.method")
        p = t["predictor"]
        if p["window"] < 2 or (p["method"] == "AR" and p["window"] < p["ar_order"] + 1):
            raise ConfigError("predictor.window too small for the chosen method")
        self.trajectory_config(0)
        self.channel_config(0)
        self.make_agent()._validate_params()
        check_positive_int(t["eval"]["n_episodes"], "eval.n_episodes")
        check_positive_int(t["sweep"]["n_episodes"], "sweep.n_episodes")
        for p_loss in t["sweep"]["p_loss"]:
            check_probability(p_loss, "sweep.p_loss")
        if not t["sweep"]["budgets"]:
            raise ConfigError("sweep.budgets is empty")

    # -- views ----------------------------------------------------------------

    def __getitem__(self, key):
        return self.tree[key]

    @property
    def seed(self):
        return int(self.tree["seed"])

    @property
    def epoch_ms(self):
        return int(self.tree["sim"]["epoch_ms"])

    @property
    def episode_ms(self):
        return int(self.tree["sim"]["episode_ms"])

    @property
    def warmup_ms(self):
        return int(self.tree["sim"]["warmup_ms"])

    def trajectory_config(self, seed):
        t = dict(self.tree["trajectory"])
        for key in ("amplitude_deg", "frequency_hz", "waypoint_deg"):
            t[key] = tuple(t[key])
        if t["waypoints"] is not None:
            t["waypoints"] = tuple(t["waypoints"])
        if t["kind"] == "csv_replay":
            # replay files are cut to the episode length
            t["duration_ms"] = self.episode_ms
        try:
            return TrajectoryConfig(duration_ms=self.episode_ms, seed=seed, **{k: v for k, v in t.items() if k != "duration_ms"})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def channel_config(self, seed, p_loss=None):
        c = dict(self.tree["channel"])
        if p_loss is not None:
            c["p_loss"] = p_loss
        return ChannelConfig(seed=seed, **c)

    def make_agent(self, **extra):
        params = dict(self.tree["agent"])
        params.update(e_max=float(self.tree["e_max"]), error_mode=self.tree["error_mode"], seed=self.seed)
        params.update(extra)
        return PrimalDualQAgent(**params)

    def hashed_tree(self):
        return {k: v for k, v in self.tree.items() if k not in _UNHASHED}

    @property
    def config_hash(self):
        blob = json.dumps(self.hashed_tree(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def dump(self):
        return yaml.safe_dump(self.tree, sort_keys=True)
