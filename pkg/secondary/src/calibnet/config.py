"""Model and training configuration, loadable from a single JSON file."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

N_QUERIES = 3  # zenith, horizon, fov


@dataclass(frozen=True)
class ModelConfig:
    """Network hyperparameters.

    The defaults are the toy configuration the test suite exercises. The
    full-scale settings (d=256, 8 heads, 6 decoder layers, residual
    backbone) are available via full(), provided for completeness but not
    covered by CI.
    """

    d: int = 64
    heads: int = 4
    encoder_blocks: int = 6
    decoder_layers: int = 2
    ffn_dim: int = 0  # 0 means 4 * d
    backbone: str = "conv"
    backbone_channels: int = 128
    max_lines: int = 512
    per_layer_supervision: bool = False
    duplicate_heads: bool = False

    def __post_init__(self):
        if self.d <= 0 or self.heads <= 0:
            raise ValueError("d and heads must be positive")
        if self.d % self.heads:
            raise ValueError(f"d={self.d} must be divisible by heads={self.heads}")
        if self.d % 4:
            raise ValueError(f"d={self.d} must be divisible by 4 for the 2D sine positions")
        if self.encoder_blocks < 1 or self.decoder_layers < 1:
            raise ValueError("encoder_blocks and decoder_layers must be >= 1")
        if self.backbone not in ("conv", "resnet50"):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.max_lines < 0:
            raise ValueError("max_lines must be non-negative")
        if self.duplicate_heads and not self.per_layer_supervision:
            raise ValueError("duplicate_heads requires per_layer_supervision")

    @property
    def ffn_width(self) -> int:
        return self.ffn_dim if self.ffn_dim else 4 * self.d

    @classmethod
    def toy(cls) -> "ModelConfig":
        return cls()

    @classmethod
    def full(cls) -> "ModelConfig":
        return cls(
            d=256,
            heads=8,
            encoder_blocks=6,
            decoder_layers=6,
            backbone="resnet50",
            backbone_channels=2048,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown model config keys {unknown}")
        return cls(**data)


@dataclass(frozen=True)
class TrainConfig:
    manifest: str
    steps: int = 200
    lr: float = 1e-3
    batch_size: int = 0  # 0 means the whole dataset every step
    seed: int = 0
    out_dir: str = "runs/calibnet"
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown train config keys {unknown}")
        if "manifest" not in data:
            raise ValueError("train config requires a manifest path")
        return cls(**data)


def load_config(path: str) -> tuple:
    """Read {"model": {...}, "train": {...}} from one JSON file."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(raw) - {"model", "train"})
    if unknown:
        raise ValueError(f"unknown config sections {unknown}")
    model = ModelConfig.from_dict(raw.get("model", {}))
    train = TrainConfig.from_dict(raw.get("train", {}))
    return model, train
