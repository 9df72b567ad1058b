"""Run configuration: an INI-style file with one section per concern.

Every key can also be given as a command-line flag; flags win.  Defaults are
the published training setup (batch 64, lr 1e-4 / 2e-4, hidden 32, L=5).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .model import ModelConfig
from .pyramid import PyramidConfig
from .training import TrainSchedule


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in value.split(",") if p.strip())


@dataclass(frozen=True)
class DataConfig:
    root: str = ""
    test_set: str = ""
    train_files: tuple[str, ...] = ()
    test_files: tuple[str, ...] = ()
    stride: int = 1


@dataclass(frozen=True)
class EvalConfig:
    k: int = 20
    samples_seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    seed: int = 0
    checkpoint_dir: str = "checkpoints"
    data: DataConfig = field(default_factory=DataConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    @property
    def pyramid(self) -> PyramidConfig:
        return self.model.pyramid

    def header(self) -> str:
        m, p, s = self.model, self.pyramid, self.schedule
        return (
            f"L={p.L} k={p.k} t_o={p.t_o} t_p={p.t_p} embed={m.embed} hidden={m.hidden} noise={m.noise} "
            f"batch={s.batch_size} epochs={s.epochs} lr_g={s.lr_g!r} lr_d={s.lr_d!r} seed={self.seed}"
        )


# (section, key) -> (target, attribute, converter).  The target names which
# nested object the value lands in.
KEYS: dict[tuple[str, str], tuple[str, str, Any]] = {
    ("pyramid", "L"): ("pyramid", "L", int),
    ("pyramid", "k"): ("pyramid", "k", int),
    ("pyramid", "t_o"): ("pyramid", "t_o", int),
    ("pyramid", "t_p"): ("pyramid", "t_p", int),
    ("model", "embed"): ("model", "embed", int),
    ("model", "hidden"): ("model", "hidden", int),
    ("model", "noise"): ("model", "noise", int),
    ("model", "pool"): ("model", "pool", int),
    ("model", "pool_hidden"): ("model", "pool_hidden", int),
    ("model", "d_hidden"): ("model", "d_hidden", int),
    ("model", "noise_scope"): ("model", "noise_scope", str),
    ("optim", "lr_g"): ("schedule", "lr_g", float),
    ("optim", "lr_d"): ("schedule", "lr_d", float),
    ("optim", "beta1"): ("schedule", "beta1", float),
    ("optim", "beta2"): ("schedule", "beta2", float),
    ("optim", "weight_decay"): ("schedule", "weight_decay", float),
    ("train", "epochs"): ("schedule", "epochs", int),
    ("train", "batch_size"): ("schedule", "batch_size", int),
    ("train", "ms_weight"): ("schedule", "ms_weight", float),
    ("train", "adv_mode"): ("schedule", "adv_mode", str),
    ("train", "seed"): ("run", "seed", int),
    ("train", "checkpoint_dir"): ("run", "checkpoint_dir", str),
    ("data", "root"): ("data", "root", str),
    ("data", "test_set"): ("data", "test_set", str),
    ("data", "train_files"): ("data", "train_files", _split_list),
    ("data", "test_files"): ("data", "test_files", _split_list),
    ("data", "stride"): ("data", "stride", int),
    ("eval", "k"): ("eval", "k", int),
    ("eval", "samples_seed"): ("eval", "samples_seed", int),
    ("eval", "workers"): ("eval", "workers", int),
}


def flag_name(section: str, key: str) -> str:
    """Command-line spelling of a config key, e.g. ``--batch-size``."""
    return "--" + key.replace("_", "-")


def build(values: dict[tuple[str, str], Any], base: RunConfig | None = None) -> RunConfig:
    """Apply already-converted ``values`` on top of ``base`` and validate."""
    base = base or RunConfig()
    parts: dict[str, dict[str, Any]] = {"pyramid": {}, "model": {}, "schedule": {}, "run": {}, "data": {}, "eval": {}}
    for sk, value in values.items():
        if sk not in KEYS:
            raise ConfigError(f"unknown config key [{sk[0]}] {sk[1]}")
        target, attr, _ = KEYS[sk]
        parts[target][attr] = value
    try:
        pyramid = replace(base.model.pyramid, **parts["pyramid"])
        model = replace(base.model, pyramid=pyramid, **parts["model"])
        schedule = replace(base.schedule, **parts["schedule"])
        data = replace(base.data, **parts["data"])
        ev = replace(base.eval, **parts["eval"])
        cfg = replace(base, model=model, schedule=schedule, data=data, eval=ev, **parts["run"])
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    s = cfg.schedule
    if s.epochs < 0 or s.batch_size < 1:
        raise ConfigError("epochs must be >= 0 and batch_size >= 1")
    if s.lr_g <= 0 or s.lr_d <= 0 or s.weight_decay < 0:
        raise ConfigError("learning rates must be positive and weight_decay non-negative")
    if not (0 <= s.beta1 < 1 and 0 <= s.beta2 < 1):
        raise ConfigError("betas must lie in [0, 1)")
    if s.adv_mode not in ("non_saturating", "minimax"):
        raise ConfigError(f"unknown adv_mode {s.adv_mode!r}")
    if s.ms_weight < 0:
        raise ConfigError("ms_weight must be non-negative")
    if cfg.eval.k < 1:
        raise ConfigError("k must be >= 1")
    if cfg.eval.workers < 1 or cfg.data.stride < 1:
        raise ConfigError("workers and stride must be >= 1")


def parse_text(text: str, source: str = "<config>") -> dict[tuple[str, str], Any]:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive (L vs k)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if (section, key) not in KEYS:
                raise ConfigError(f"{source}: unknown key [{section}] {key}")
            conv = KEYS[(section, key)][2]
            try:
                values[(section, key)] = conv(raw)
            except ValueError as e:
                raise ConfigError(f"{source}: bad value for [{section}] {key}: {raw!r}") from e
    return values


def load(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return build(parse_text(path.read_text(), str(path)))


def dumps(cfg: RunConfig) -> str:
    """INI text that :func:`load` maps back to ``cfg``."""
    objs = {
        "pyramid": cfg.model.pyramid, "model": cfg.model, "schedule": cfg.schedule,
        "run": cfg, "data": cfg.data, "eval": cfg.eval,
    }
    sections: dict[str, list[str]] = {}
    for (section, key), (target, attr, _) in KEYS.items():
        value = getattr(objs[target], attr)
        if isinstance(value, tuple):
            value = ",".join(value)
        elif isinstance(value, float):
            value = repr(value)
        sections.setdefault(section, []).append(f"{key} = {value}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


__all__ = ["RunConfig", "DataConfig", "EvalConfig", "KEYS", "build", "load", "dumps", "parse_text", "flag_name"]
