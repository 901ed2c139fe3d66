"""Model and training configuration, loadable from flat key=value files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass
class ModelConfig:
    """Architecture and optimization hyper-parameters.

    Defaults sit inside the published search ranges: 8 inter-attention heads
    of width 20 (d_model 160), half as many self-attention heads, batch 10,
    lr 1e-3, warm-up ratio 0.1.
    """

    d_model: int = 160
    heads: int = 8
    is_less_head: bool = True
    self_heads: int = 0  # 0 -> derived from heads/is_less_head
    d_ff: int = 0  # 0 -> 2 * d_model
    char_embed_dropout: float = 0.4
    word_embed_dropout: float = 0.002
    fc_dropout1: float = 0.2
    fc_dropout2: float = 0.2
    attn_dropout: float = 0.1
    lr: float = 1e-3
    batch_size: int = 10
    warmup: float = 0.1
    epochs: int = 100
    patience: int = 10
    seed: int = 1
    ablation: str = "none"
    max_match_len: int = 10
    precision: str = "float64"
    degenerate_fallback: bool = False
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in (
            "char_embed_dropout",
            "word_embed_dropout",
            "fc_dropout1",
            "fc_dropout2",
            "attn_dropout",
        ):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {rate}")
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.d_model % self.effective_self_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by self heads "
                f"{self.effective_self_heads}"
            )
        if self.ablation not in ("none", "-RPE", "-TAG"):
            raise ValueError(f"ablation must be none, -RPE or -TAG, got {self.ablation!r}")
        if self.precision not in ("float64", "float32"):
            raise ValueError(f"precision must be float64 or float32, got {self.precision!r}")
        if not 0.0 <= self.warmup <= 1.0:
            raise ValueError(f"warmup ratio must be in [0, 1], got {self.warmup}")
        if self.batch_size < 1 or self.epochs < 0 or self.max_match_len < 2:
            raise ValueError("batch_size >= 1, epochs >= 0, max_match_len >= 2 required")

    @property
    def effective_self_heads(self) -> int:
        if self.self_heads:
            return self.self_heads
        return max(1, self.heads // 2) if self.is_less_head else self.heads

    @property
    def effective_d_ff(self) -> int:
        return self.d_ff if self.d_ff else 2 * self.d_model

    @property
    def dtype(self):
        import numpy as np

        return np.float64 if self.precision == "float64" else np.float32

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def _coerce_value(raw: str, target_type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return target_type(raw.strip())


def load_config(path) -> ModelConfig:
    """Parse a flat UTF-8 key=value file; unknown keys are rejected.

    Blank lines and lines starting with '#' are ignored.
    """
    fields = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    types = {
        name: {"int": int, "float": float, "str": str, "bool": bool}[t]
        for name, t in fields.items()
    }
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in types:
                raise ValueError(f"{path}: line {lineno}: unknown config key {key!r}")
            try:
                values[key] = _coerce_value(raw, types[key])
            except ValueError as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from None
    return ModelConfig.from_dict(values)
