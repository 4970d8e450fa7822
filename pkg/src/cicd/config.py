"""Model/training configuration, label-table presets, and validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError

LABEL_PRESETS = {
    "snopes2": ["true", "false"],
    "politifact3": ["true", "mixed", "false"],
    "fever3": ["supported", "refuted", "nei"],
}


@dataclass
class ModelConfig:
    d: int = 64                     # embedding width
    d_h: int = 32                   # LSTM hidden width per direction
    l: int = 100                    # article length after pad/truncate
    p: int = 20                     # claim length after pad/truncate
    k: int = 5                      # fragments kept by the selector
    o: Optional[int] = None         # generated evidence length; defaults to 2k
    alpha: float = 0.2              # inconsistency loss weight
    n_classes: int = 2
    label_names: list[str] = field(default_factory=lambda: list(LABEL_PRESETS["snopes2"]))
    vocab_size: Optional[int] = None  # resolved from training data
    dropout: float = 0.4
    lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    n_cap: int = 32                 # articles kept per instance (first-N)
    min_freq: int = 1
    dev_fraction: float = 0.2       # used when no dev file is given
    early_stop_dev_f1: Optional[float] = None
    projection_mode: bool = False   # map both evidence vectors to a shared width
    projection_dim: int = 256
    share_isi_encoder: bool = False
    # ablation toggles
    no_ced: bool = False
    no_isi: bool = False
    no_selection: bool = False
    no_interaction: bool = False
    no_word_attention: bool = False
    no_sentence_attention: bool = False
    no_merge: bool = False
    no_matching: bool = False

    def __post_init__(self):
        if self.o is None:
            self.o = 2 * self.k

    # derived widths
    @property
    def state_width(self) -> int:
        return 2 * self.d_h

    @property
    def global_width(self) -> int:
        return self.o * 2 * self.d_h

    @property
    def local_width(self) -> int:
        return self.k * 4 * self.d_h

    def classifier_width(self) -> int:
        w = 0
        if not self.no_ced:
            w += self.global_width
        if not self.no_isi:
            w += self.local_width
        return w

    def uses_inconsistency(self) -> bool:
        return self.alpha > 0.0 and not self.no_ced and not self.no_isi

    def validate(self) -> None:
        for name in ("d", "d_h", "l", "p", "k", "o", "n_classes", "batch_size",
                     "epochs", "n_cap", "min_freq", "projection_dim"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"config field '{name}' must be a positive integer, got {v!r}")
        for name in ("alpha", "lr"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"config field '{name}' must be a nonnegative number, got {v!r}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"config field 'dropout' must be in [0, 1), got {self.dropout!r}")
        if not (0.0 < self.beta1 < 1.0) or not (0.0 < self.beta2 < 1.0):
            raise ConfigError("config fields 'beta1'/'beta2' must lie in (0, 1)")
        if not (0.0 < self.dev_fraction < 1.0):
            raise ConfigError(f"config field 'dev_fraction' must be in (0, 1), got {self.dev_fraction!r}")
        if self.early_stop_dev_f1 is not None and not (0.0 < self.early_stop_dev_f1 <= 1.0):
            raise ConfigError("config field 'early_stop_dev_f1' must be in (0, 1]")
        if len(self.label_names) != self.n_classes:
            raise ConfigError(
                f"config field 'label_names' has {len(self.label_names)} entries "
                f"but 'n_classes' is {self.n_classes}")
        if len(set(self.label_names)) != len(self.label_names):
            raise ConfigError("config field 'label_names' contains duplicates")
        if self.no_ced and self.no_isi:
            raise ConfigError("config fields 'no_ced' and 'no_isi' cannot both be set")
        if not self.projection_mode and not self.no_ced and not self.no_isi:
            if self.global_width != self.local_width:
                raise ConfigError(
                    f"config field 'o': o*2*d_h ({self.global_width}) must equal "
                    f"k*4*d_h ({self.local_width}), i.e. o == 2k, unless 'projection_mode' is set")
        if self.vocab_size is not None and self.vocab_size < 3:
            raise ConfigError("config field 'vocab_size' must cover the reserved ids")

    def label_table(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.label_names)}

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# Preset defaults; a config file and then CLI flags override these.
MODEL_PRESETS: dict[str, dict] = {
    "snopes2": {
        "n_classes": 2, "label_names": LABEL_PRESETS["snopes2"], "batch_size": 32,
    },
    "politifact3": {
        "n_classes": 3, "label_names": LABEL_PRESETS["politifact3"], "batch_size": 32,
    },
    "fever3": {
        "n_classes": 3, "label_names": LABEL_PRESETS["fever3"], "batch_size": 64,
    },
    "synthetic": {
        "n_classes": 2, "label_names": ["class_0", "class_1"], "batch_size": 16,
        "d": 32, "d_h": 16, "k": 2, "o": 4, "dropout": 0.2, "epochs": 30,
    },
}

_FIELD_NAMES = {f.name for f in dataclasses.fields(ModelConfig)}


def config_from_dict(data: dict, preset: Optional[str] = None,
                     overrides: Optional[dict] = None) -> ModelConfig:
    """Build a validated config; precedence: overrides > data > preset defaults."""
    merged: dict = {}
    if preset is not None:
        if preset not in MODEL_PRESETS:
            raise ConfigError(
                f"unknown preset '{preset}' (choose from {sorted(MODEL_PRESETS)})")
        merged.update(MODEL_PRESETS[preset])
    for source in (data, overrides or {}):
        for key, value in source.items():
            if key not in _FIELD_NAMES:
                raise ConfigError(f"unknown config field '{key}'")
            merged[key] = value
    try:
        cfg = ModelConfig(**merged)
    except TypeError as exc:  # pragma: no cover - defensive
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path, preset: Optional[str] = None,
                overrides: Optional[dict] = None) -> ModelConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(raw, preset=preset, overrides=overrides)
