"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Unknown keys are an error.
Defaults reproduce the published hyper-parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .network import ModelArchitecture
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _dims(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(tok) for tok in text.replace("/", ",").split(","))


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "SYNTH"
    data_root: str = "data"
    cap_test_targets: bool = True
    # synthetic bundle, used when dataset = SYNTH
    synth_num_train: int = 20
    synth_num_test: int = 10
    synth_min_len: int = 140
    synth_max_len: int = 200
    synth_num_conditions: int = 1
    synth_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)


_ARCH_KEYS = {
    "input_dim": int, "feature_mlp_dims": _dims, "lstm_cells": int,
    "regression_mlp_dims": _dims, "activation": str, "dropout": float,
    "ablate_feature_mlp": _bool,
}
_TRAIN_KEYS = {
    "learning_rate": float, "batch_size": int, "cap": int, "train_fraction": float,
    "max_epochs": int, "patience": int, "grad_clip": _opt_float, "seed": int,
}
_RUN_KEYS = {
    "dataset": str, "data_root": str, "cap_test_targets": _bool,
    "synth_num_train": int, "synth_num_test": int, "synth_min_len": int,
    "synth_max_len": int, "synth_num_conditions": int, "synth_seed": int,
}
KNOWN_KEYS = {**_ARCH_KEYS, **_TRAIN_KEYS, **_RUN_KEYS}


def parse_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    return raw


def build_config(raw: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    unknown = sorted(set(raw) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    base = base or RunConfig()
    bad = []
    converted = {}
    for key, text in raw.items():
        try:
            converted[key] = KNOWN_KEYS[key](text)
        except ValueError:
            bad.append(key)
    if bad:
        raise ConfigError(f"invalid value for config key(s): {', '.join(sorted(bad))}")

    try:
        arch = replace(base.train.arch, **{k: v for k, v in converted.items() if k in _ARCH_KEYS})
        train = replace(base.train, arch=arch,
                        **{k: v for k, v in converted.items() if k in _TRAIN_KEYS})
        run = replace(base, train=train, **{k: v for k, v in converted.items() if k in _RUN_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return run


def load_config(text: str | None) -> RunConfig:
    return build_config(parse_config_text(text)) if text else RunConfig()


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form, used for the config digest."""
    lines = []
    for f in fields(RunConfig):
        if f.name != "train":
            lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    for f in fields(TrainConfig):
        if f.name != "arch":
            lines.append(f"{f.name} = {getattr(cfg.train, f.name)}")
    for f in fields(ModelArchitecture):
        value = getattr(cfg.train.arch, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
