"""Model hyperparameters and feature toggles."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass


LOSS_CROSS_ENTROPY = "cross_entropy"
LOSS_BINARY_CE = "binary_ce"


@dataclass
class ModelConfig:
    hidden_size: int = 50
    word_dim: int = 50
    pos_dim: int = 50
    highlight_dim: int = 5
    visibility_buckets: int = 20
    visual_dim: int = 50
    arg_dim: int = 10
    attn_dim: int = 50
    history_window: int = 3
    context_turns: int = 3
    max_context_tokens: int = 48
    max_utterance_tokens: int = 24
    max_metadata_tokens: int = 16
    memory_offset_cap: int = 50
    oov_buckets: int = 1000
    use_metadata: bool = True
    use_visual: bool = True
    use_query_attention: bool = True
    use_self_attention: bool = True
    loss: str = LOSS_CROSS_ENTROPY
    color_in_catalog: bool = False
    # set when imported word vectors (with a learned projection) replace the
    # trainable embedding table
    pretrained_dim: int = 0

    def validate(self) -> None:
        if not (self.use_metadata or self.use_visual):
            raise ValueError("at least one of metadata/visual features must be enabled")
        if self.loss not in (LOSS_CROSS_ENTROPY, LOSS_BINARY_CE):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.pos_dim % 2 != 0 or self.pos_dim < 2:
            raise ValueError("pos_dim must be even and >= 2")
        if self.history_window < 0:
            raise ValueError("history_window must be >= 0")

    @property
    def query_dim(self) -> int:
        return 4 * self.hidden_size + 2 * self.arg_dim

    @property
    def entity_dim(self) -> int:
        return (
            2 * self.hidden_size          # query-attended metadata encoding
            + self.visual_dim
            + self.pos_dim                # x-position sinusoid
            + self.visibility_buckets
            + self.highlight_dim
            + 2 * self.pos_dim            # last-visible / last-selected sinusoids
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        cfg = cls(**{k: raw[k] for k in raw if k in cls.__dataclass_fields__})
        cfg.validate()
        return cfg

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]
