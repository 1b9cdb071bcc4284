"""Training configuration: defaults, validation, and the "key = value" file format.

CLI flags mirror these keys one-to-one and take precedence over file
values.  All randomness in a run is governed by ``seed``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError

SAMPLING_MODES = ("unif", "bern")
BRIDGE_MODES = ("EYE", "MAT")
INIT_MODES = ("PRE", "UNP")
NORM_FLAGS = ("L1", "L2")
SELECT_MODES = ("none", "accuracy", "hits10")


@dataclass
class TrainingConfig:
    """Hyperparameters and run controls for one training job."""

    d: int = 100
    lr: float = 0.001
    margin_rel: float = 1.0
    margin_ins: float = 0.4
    margin_sub: float = 0.3
    alpha: float = 0.5
    epochs: int = 1000
    batch_size: int = 512
    sampling: str = "unif"
    bridge: str = "EYE"
    init: str = "UNP"
    seed: int = 0
    norm: str = "L2"
    negatives_per_positive: int = 1
    freeze_concept_vectors: bool = False
    valid_every: int = 0          # 0 disables validation-based checkpointing
    select_by: str = "none"       # accuracy | hits10 | none
    threads: int = 1

    def validate(self) -> "TrainingConfig":
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        for name in ("margin_rel", "margin_ins", "margin_sub"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigError(f"sampling must be one of {SAMPLING_MODES}")
        if self.bridge not in BRIDGE_MODES:
            raise ConfigError(f"bridge must be one of {BRIDGE_MODES}")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}")
        if self.norm not in NORM_FLAGS:
            raise ConfigError(f"norm must be one of {NORM_FLAGS}")
        if self.select_by not in SELECT_MODES:
            raise ConfigError(f"select_by must be one of {SELECT_MODES}")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        if self.valid_every < 0:
            raise ConfigError("valid_every must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values).validate()


def _coerce(name: str, raw: str, target_type: type):
    raw = raw.strip()
    try:
        if target_type is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r} as {target_type.__name__}") from None


def load_config_file(path: str) -> dict:
    """Parse a line-oriented "key = value" config file into typed values.

    Blank lines and lines starting with '#' are ignored.
    """
    if not os.path.exists(path):
        raise ConfigError(f"missing config file: {path}")
    types = {f.name: f.type for f in dataclasses.fields(TrainingConfig)}
    # dataclasses stores annotations as strings under future-annotations
    type_map = {"int": int, "float": float, "str": str, "bool": bool}
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            target = type_map[types[key]] if isinstance(types[key], str) else types[key]
            values[key] = _coerce(key, raw, target)
    return values


def save_config_file(config: TrainingConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in config.to_dict().items():
            fh.write(f"{key} = {value}\n")


def resolve_config(file_path: Optional[str] = None, overrides: Optional[dict] = None) -> TrainingConfig:
    """Defaults <- config file <- explicit overrides, then validate."""
    values: dict = {}
    if file_path:
        values.update(load_config_file(file_path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainingConfig.from_dict(values)
