"""Model and training hyperparameter records.

Config files are plain JSON mirroring the field names below, so a run is
fully described by (config, dataset, seed).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

ATTENTION_MODES = ("chromatic", "monochrome", "additive")
DROPOUT_MODES = ("none", "node", "edge", "feature")
RPE_KINDS = ("rwse", "spde", "none")
RING_ENCODINGS = ("additive", "categorical")
NORM_KINDS = ("batch", "layer")
TASKS = ("regression", "node_class")


@dataclass
class ModelConfig:
    # architecture
    layers: int = 4
    width: int = 32
    heads: int = 4
    attention: str = "chromatic"
    use_edge_values: bool = True
    scale_scores: bool = True
    norm: str = "batch"
    # pairwise positional encoding
    rpe: str = "rwse"
    rpe_steps: int = 8
    rpe_dim: int = 16
    nonneg_rwse: bool = False
    # node-wise positional encoding (0 steps = off)
    node_pe_steps: int = 8
    node_pe_dim: int = 16
    # ring features
    rings: bool = False
    max_ring_size: int = 6
    ring_encoding: str = "additive"
    ring_self_membership: bool = True
    # sharing / regularization
    share_edge_params: bool = True
    attn_dropout: str = "none"
    attn_dropout_p: float = 0.0
    dropout: float = 0.0
    # task / vocabularies
    task: str = "regression"
    num_classes: int = 2
    node_vocab_sizes: list[int] = field(default_factory=lambda: [8])
    num_bond_types: int = 4
    bond_dim: int = 16

    def validate(self) -> None:
        if self.layers < 0:
            raise ConfigError("layers must be >= 0")
        if self.width < 1 or self.heads < 1:
            raise ConfigError("width and heads must be >= 1")
        if self.width % self.heads != 0:
            raise ConfigError(
                f"width {self.width} not divisible by heads {self.heads}"
            )
        if self.attention not in ATTENTION_MODES:
            raise ConfigError(f"unknown attention mode {self.attention!r}")
        if self.attn_dropout not in DROPOUT_MODES:
            raise ConfigError(f"unknown attention dropout mode {self.attn_dropout!r}")
        if not (0.0 <= self.attn_dropout_p < 1.0):
            raise ConfigError("attn_dropout_p must lie in [0, 1)")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must lie in [0, 1)")
        if self.rpe not in RPE_KINDS:
            raise ConfigError(f"unknown rpe kind {self.rpe!r}")
        if self.rpe != "none" and (self.rpe_steps < 1 or self.rpe_dim < 1):
            raise ConfigError("rpe_steps and rpe_dim must be >= 1")
        if self.node_pe_steps < 0:
            raise ConfigError("node_pe_steps must be >= 0")
        if self.node_pe_steps > 0 and self.node_pe_dim < 1:
            raise ConfigError("node_pe_dim must be >= 1")
        if self.rings and self.ring_encoding not in RING_ENCODINGS:
            raise ConfigError(f"unknown ring encoding {self.ring_encoding!r}")
        if self.norm not in NORM_KINDS:
            raise ConfigError(f"unknown norm kind {self.norm!r}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task == "node_class" and self.num_classes < 2:
            raise ConfigError("node classification needs num_classes >= 2")
        if not self.node_vocab_sizes or any(v < 1 for v in self.node_vocab_sizes):
            raise ConfigError("node_vocab_sizes must be non-empty positive counts")
        if self.num_bond_types < 1 or self.bond_dim < 1:
            raise ConfigError("num_bond_types and bond_dim must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ModelConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


@dataclass
class TrainConfig:
    epochs: int = 200
    warmup_epochs: int = 10
    lr: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 8
    seed: int = 0
    clip_norm: float | None = None

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not (0 <= self.warmup_epochs < self.epochs):
            raise ConfigError("warmup_epochs must satisfy 0 <= warmup < epochs")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive when set")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg
