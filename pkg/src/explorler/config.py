"""Dataclass configs, validation, and YAML/JSON config files."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

METHODS = ("explorler", "checkpoint_avg", "random_walk", "pbt", "guided_es", "vfs", "none")


class ConfigError(ValueError):
    """Raised with the dotted name of the offending key."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class PpoConfig:
    learning_rate: float = 1e-3
    clip_epsilon: float = 0.2
    steps_per_rollout: int = 1024
    batch_size: int = 64
    n_epochs: int = 10
    gamma: float = 0.9
    gae_lambda: float = 0.95
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    normalize_advantage: bool = True
    init_log_std: float = 0.0

    def validate(self, prefix="ppo"):
        _check(self.learning_rate >= 0, f"{prefix}.learning_rate", "must be >= 0")
        _check(0 < self.clip_epsilon < 1, f"{prefix}.clip_epsilon", "must be in (0, 1)")
        _check(self.steps_per_rollout >= 1, f"{prefix}.steps_per_rollout", "must be >= 1")
        _check(1 <= self.batch_size <= self.steps_per_rollout, f"{prefix}.batch_size",
               "must be in [1, steps_per_rollout]")
        _check(self.n_epochs >= 1, f"{prefix}.n_epochs", "must be >= 1")
        _check(0 <= self.gamma < 1, f"{prefix}.gamma", "must be in [0, 1)")
        _check(0 <= self.gae_lambda <= 1, f"{prefix}.gae_lambda", "must be in [0, 1]")
        _check(self.entropy_coef >= 0, f"{prefix}.entropy_coef", "must be >= 0")
        _check(self.value_coef >= 0, f"{prefix}.value_coef", "must be >= 0")
        _check(self.max_grad_norm > 0, f"{prefix}.max_grad_norm", "must be > 0")
        _check(-20 <= self.init_log_std <= 2, f"{prefix}.init_log_std", "must be in [-20, 2]")


@dataclass
class EsaConfig:
    # 0 means "half the PPO epoch count, rounded up"
    num_agents: int = 0
    num_neighbors: int = 6
    num_steps: int = 60
    step_size: float = 0.001
    release_interval: int = 20
    momentum_beta: float = 0.9
    lj_epsilon: float = 1.0
    # expected norm of the init jitter, as a fraction of the mean pairwise anchor distance
    jitter_scale: float = 0.05

    def validate(self, prefix="esa"):
        _check(self.num_agents >= 0, f"{prefix}.num_agents", "must be >= 0 (0 = n_epochs/2)")
        _check(self.num_neighbors >= 1, f"{prefix}.num_neighbors", "must be >= 1")
        _check(self.num_steps >= 0, f"{prefix}.num_steps", "must be >= 0")
        _check(self.step_size > 0, f"{prefix}.step_size", "must be > 0")
        _check(self.release_interval >= 1, f"{prefix}.release_interval", "must be >= 1")
        _check(self.num_steps % self.release_interval == 0, f"{prefix}.release_interval",
               "must divide num_steps")
        _check(0 <= self.momentum_beta < 1, f"{prefix}.momentum_beta", "must be in [0, 1)")
        _check(self.lj_epsilon > 0, f"{prefix}.lj_epsilon", "must be > 0")
        _check(self.jitter_scale >= 0, f"{prefix}.jitter_scale", "must be >= 0")


@dataclass
class BaselineConfig:
    population_size: int = 10
    pbt_noise: float = 0.02
    es_sigma: float = 0.02
    es_mix: float = 0.5
    es_pairs: int = 4
    vfs_step_size: float = 0.01
    vfs_steps: int = 3
    vfs_obs_samples: int = 64

    def validate(self, prefix="baselines"):
        _check(self.population_size >= 2, f"{prefix}.population_size", "must be >= 2")
        _check(self.pbt_noise >= 0, f"{prefix}.pbt_noise", "must be >= 0")
        _check(self.es_sigma > 0, f"{prefix}.es_sigma", "must be > 0")
        _check(0 <= self.es_mix <= 1, f"{prefix}.es_mix", "must be in [0, 1]")
        _check(self.es_pairs >= 1, f"{prefix}.es_pairs", "must be >= 1")
        _check(self.vfs_step_size >= 0, f"{prefix}.vfs_step_size", "must be >= 0")
        _check(self.vfs_steps >= 0, f"{prefix}.vfs_steps", "must be >= 0")
        _check(self.vfs_obs_samples >= 1, f"{prefix}.vfs_obs_samples", "must be >= 1")


@dataclass
class PipelineConfig:
    total_iterations: int = 196
    esa_trigger_interval: int = 10
    eval_episodes: int = 3
    include_incumbent: bool = False
    pretrain_steps: int = 0
    eval_action_mode: str = "deterministic"

    def validate(self, prefix="pipeline"):
        _check(self.total_iterations >= 0, f"{prefix}.total_iterations", "must be >= 0")
        _check(self.esa_trigger_interval >= 1, f"{prefix}.esa_trigger_interval", "must be >= 1")
        _check(self.eval_episodes >= 1, f"{prefix}.eval_episodes", "must be >= 1")
        _check(self.pretrain_steps >= 0, f"{prefix}.pretrain_steps", "must be >= 0")
        _check(self.eval_action_mode in ("deterministic", "stochastic"), f"{prefix}.eval_action_mode",
               "must be 'deterministic' or 'stochastic'")


@dataclass
class RunConfig:
    env: str = "pendulum"
    method: str = "explorler"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3])
    out: str = "runs/default"
    smoothing_window: int = 10
    ppo: PpoConfig = field(default_factory=PpoConfig)
    esa: EsaConfig = field(default_factory=EsaConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)

    def validate(self):
        from .envs import ENVS

        _check(self.env in ENVS, "env", f"unknown environment {self.env!r}")
        _check(self.method in METHODS, "method", f"must be one of {METHODS}")
        _check(len(self.seeds) >= 1, "seeds", "need at least one seed")
        _check(self.smoothing_window >= 1, "smoothing_window", "must be >= 1")
        self.ppo.validate()
        self.esa.validate()
        self.pipeline.validate()
        self.baselines.validate()
        return self

    def num_agents(self):
        return self.esa.num_agents or math.ceil(self.ppo.n_epochs / 2)

    def to_dict(self):
        return dataclasses.asdict(self)


def _check(ok, key, message):
    if not ok:
        raise ConfigError(key, message)


# per-environment defaults layered under the user's file
ENV_DEFAULTS = {
    "pendulum": {},
    "pointmass": {
        "ppo": {"learning_rate": 3e-4, "steps_per_rollout": 500, "batch_size": 50,
                "gamma": 0.98, "gae_lambda": 0.95},
        "pipeline": {"total_iterations": 60},
    },
}

_SECTIONS = {"ppo": PpoConfig, "esa": EsaConfig, "pipeline": PipelineConfig, "baselines": BaselineConfig}


def _coerce(key, value, target_type, default):
    if target_type is bool or isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, str):
            # PyYAML reads "1e-3" (no dot) as a string
            try:
                return float(value)
            except ValueError:
                raise ConfigError(key, f"expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(key, f"expected a list of integers, got {value!r}")
        return list(value)
    return value


def _build_section(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(prefix, "expected a mapping")
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
        kwargs[key] = _coerce(f"{prefix}.{key}", value, None, getattr(defaults, key))
    return cls(**kwargs)


def _merge(base, override):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def config_from_dict(data, **overrides):
    """Resolve a (possibly partial) config tree; ``overrides`` are top-level keys."""
    data = dict(data or {})
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    top = {f.name: f for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(key, "unknown key")
    env = data.get("env", RunConfig.env)
    if not isinstance(env, str):
        raise ConfigError("env", f"expected a string, got {env!r}")
    data = _merge(ENV_DEFAULTS.get(env, {}), data)
    defaults = RunConfig()
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = _coerce(key, value, None, getattr(defaults, key))
    return RunConfig(**kwargs).validate()


def parse_config(path=None, **overrides):
    """Load a YAML (or JSON run manifest) config file and apply defaults.

    A JSON file that carries a ``"config"`` key is treated as a run manifest
    and its echoed config is used.
    """
    data = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            data = json.loads(text) if text.strip() else {}
            if "config" in data:
                data = data["config"]
        else:
            data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config file must contain a mapping")
    return config_from_dict(data, **overrides)


def dump_config(cfg, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
