"""Experiment configuration: JSON in, fully resolved dataclasses out."""

from __future__ import annotations

import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .pretrain import DaeConfig
from .siamese import LbfgsConfig, LossWeights, SgdConfig, TrainConfig

EXPERIMENTS = ("spinning_sprites", "two_modalities", "rotation_invariance")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class NetSpec:
    hidden: list = field(default_factory=lambda: [100, 100])
    output_dim: int = 100
    hidden_activation: str = "tanh"
    output_activation: str = "linear"
    output_scale: float = 0.1
    scale_floor: float = 0.3

    def __post_init__(self):
        if not self.hidden or min(self.hidden) < 1 or self.output_dim < 1:
            raise ValueError("layer sizes must be positive and at least one hidden layer given")
        if self.output_scale <= 0:
            raise ValueError("output_scale must be positive")
        if self.scale_floor < 0:
            raise ValueError("scale_floor must be non-negative")

    def dims(self, input_dim):
        return [input_dim, *self.hidden, self.output_dim]

    def activations(self):
        return [self.hidden_activation] * len(self.hidden) + [self.output_activation]


@dataclass
class PretrainSpec:
    enabled: bool = False
    dae: DaeConfig = field(default_factory=DaeConfig)


@dataclass
class DataSpec:
    T: int = 100
    omega_min: float = 0.01
    omega_max: float = 0.1
    corpus_size: int = 200
    corpus_seed: int = 0
    image_dir: typing.Optional[str] = None


@dataclass
class EmbeddingSpec:
    method: str = "diffusion"
    k: int = 2
    bandwidth: typing.Optional[float] = None
    # if set (and no bandwidth), scale the kernel to the k-th neighbour distance
    neighbors: typing.Optional[int] = None

    def __post_init__(self):
        if self.method not in ("pca", "diffusion"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be > 0")
        if self.neighbors is not None and self.neighbors < 1:
            raise ValueError("neighbors must be >= 1")


@dataclass
class EvalSpec:
    invariance_trials: int = 2000
    recovery_points: int = 2000


@dataclass
class ExperimentConfig:
    experiment: str = "two_modalities"
    n_pairs: int = 10000
    test_fraction: float = 0.2
    seed: int = 0
    net1: NetSpec = field(default_factory=NetSpec)
    net2: NetSpec = field(default_factory=NetSpec)
    pretrain: PretrainSpec = field(default_factory=PretrainSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataSpec = field(default_factory=DataSpec)
    embedding: EmbeddingSpec = field(default_factory=EmbeddingSpec)
    evaluation: EvalSpec = field(default_factory=EvalSpec)
    out: str = "runs"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if self.n_pairs < 2:
            raise ValueError("n_pairs must be >= 2")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.net1.output_dim != self.net2.output_dim:
            raise ValueError("net1 and net2 must share output_dim")


# Per-experiment defaults, applied beneath whatever the user's file sets.
PRESETS = {
    "two_modalities": {
        "net1": {"hidden": [100, 100], "output_dim": 100},
        "net2": {"hidden": [100, 100], "output_dim": 100},
        "train": {"optimizer": "lbfgs", "lbfgs": {"max_iters": 300}},
    },
    "rotation_invariance": {
        "net1": {"hidden": [100, 100], "output_dim": 100},
        "net2": {"hidden": [100, 100], "output_dim": 100},
        "train": {"optimizer": "lbfgs", "lbfgs": {"max_iters": 300}},
    },
    "spinning_sprites": {
        "net1": {"hidden": [150, 150], "output_dim": 100},
        "net2": {"hidden": [150, 150], "output_dim": 100},
        "train": {"optimizer": "sgd_momentum",
                  "sgd": {"learning_rate": 0.05, "batch_size": 20, "epochs": 5}},
        "embedding": {"neighbors": 20},
    },
}


def _merge(base, over):
    out = dict(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _build(cls, data, path):
    """Recursively instantiate dataclass ``cls`` from ``data``, naming bad fields."""
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}".lstrip("."), "unknown field")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        sub = f"{path}.{f.name}".lstrip(".")
        value, hint = data[f.name], hints[f.name]
        if dataclasses.is_dataclass(hint):
            kwargs[f.name] = _build(hint, value, sub)
        else:
            kwargs[f.name] = _coerce(hint, value, sub)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from exc


def _coerce(hint, value, path):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if value is None:
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true/false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if hint is list:
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigError(path, "expected a list of integers")
        return list(value)
    return value


def resolve(raw):
    """Resolve a raw JSON dict (possibly partial) into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a JSON object")
    experiment = raw.get("experiment", ExperimentConfig.experiment)
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    cfg = _build(ExperimentConfig, _merge(PRESETS[experiment], raw), "")
    # one master seed drives every stage unless a stage seed was given
    train_raw = raw.get("train", {}) if isinstance(raw.get("train"), dict) else {}
    if "seed" not in train_raw:
        cfg.train.seed = cfg.seed
    dae_raw = raw.get("pretrain", {}).get("dae", {}) if isinstance(raw.get("pretrain"), dict) else {}
    if "seed" not in dae_raw:
        cfg.pretrain.dae.seed = cfg.seed
    return cfg


def load_config(path, env=None):
    """Read a JSON config; ``CVL_SEED`` in the environment overrides ``seed``."""
    env = os.environ if env is None else env
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON in {path}: {exc}") from exc
    if "CVL_SEED" in env:
        try:
            seed = int(env["CVL_SEED"])
        except ValueError as exc:
            raise ConfigError("CVL_SEED", "must be an integer") from exc
        raw = dict(raw, seed=seed)
        if isinstance(raw.get("train"), dict):
            raw["train"] = {k: v for k, v in raw["train"].items() if k != "seed"}
        pre = raw.get("pretrain")
        if isinstance(pre, dict) and isinstance(pre.get("dae"), dict):
            raw["pretrain"] = dict(pre, dae={k: v for k, v in pre["dae"].items() if k != "seed"})
    return resolve(raw)


def to_dict(cfg):
    return dataclasses.asdict(cfg)
