"""Token and argument vocabularies.

The word vocabulary is built from the training corpus; unknown tokens at
inference hash into a fixed bank of out-of-vocabulary embedding rows.
Argument types form a closed vocabulary and reject unknown values.
"""

from __future__ import annotations

import zlib
from typing import Dict, Iterable, List, Sequence

from ..catalog import ENTITY_KINDS, VisualEntity, metadata_token_sequence
from ..data import ARG_TYPES, GroundingExample
from ..text import tokenize

PAD = "<pad>"
USER = "<user>"
AGENT = "<agent>"
RESERVED = (PAD, USER, AGENT)


class Vocabulary:
    def __init__(self, tokens: Sequence[str], oov_buckets: int = 1000):
        self.tokens: List[str] = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.oov_buckets = oov_buckets
        self._index: Dict[str, int] = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def table_size(self) -> int:
        return len(self.tokens) + self.oov_buckets

    @property
    def pad_id(self) -> int:
        return 0

    def id_of(self, token: str) -> int:
        idx = self._index.get(token)
        if idx is not None:
            return idx
        return len(self.tokens) + zlib.crc32(token.encode("utf-8")) % self.oov_buckets

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.id_of(t) for t in tokens]

    def to_dict(self) -> dict:
        return {"tokens": self.tokens[len(RESERVED):], "oov_buckets": self.oov_buckets}

    @classmethod
    def from_dict(cls, raw: dict) -> "Vocabulary":
        return cls(raw["tokens"], oov_buckets=int(raw["oov_buckets"]))


class ArgVocabulary:
    """Argument-name embeddings get an <unk> fallback row; arg types are closed."""

    def __init__(self, arg_names: Sequence[str]):
        self.arg_names: List[str] = sorted(set(arg_names))
        self._index = {name: i + 1 for i, name in enumerate(self.arg_names)}  # 0 = <unk>

    @property
    def n_names(self) -> int:
        return len(self.arg_names) + 1

    def name_id(self, name: str) -> int:
        return self._index.get(name, 0)

    def type_id(self, arg_type: str) -> int:
        if arg_type not in ARG_TYPES:
            raise ValueError(f"unknown arg_type {arg_type!r} (closed vocabulary {ARG_TYPES})")
        return ARG_TYPES.index(arg_type)

    def to_dict(self) -> dict:
        return {"arg_names": self.arg_names}

    @classmethod
    def from_dict(cls, raw: dict) -> "ArgVocabulary":
        return cls(raw["arg_names"])


def load_word_vectors(path) -> tuple:
    """Text-format vector file: `token v1 v2 ... vD` per line. Returns (D, map)."""
    table: Dict[str, "np.ndarray"] = {}
    import numpy as np

    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected `token v1 ... vD`")
            vec = np.asarray([float(v) for v in parts[1:]], dtype=np.float64)
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValueError(f"{path}:{lineno}: inconsistent vector dim")
            table[parts[0]] = vec
    if not table:
        raise ValueError(f"{path}: empty vector file")
    return dim, table


def build_vocab(
    examples: Iterable[GroundingExample],
    max_metadata_tokens: int,
    color_in_catalog: bool,
    oov_buckets: int = 1000,
) -> tuple:
    """Collect corpus tokens (utterances, context, metadata) and arg names."""
    seen = set()
    arg_names = set()
    for ex in examples:
        seen.update(tokenize(ex.utterance))
        for _, text in ex.dialogue_context:
            seen.update(tokenize(text))
        for cand in ex.candidates:
            entity = VisualEntity.from_dict(cand)
            seen.update(
                metadata_token_sequence(entity, max_metadata_tokens, color_in_catalog)
            )
        arg_names.add(ex.arg_name)
    seen.update(ENTITY_KINDS)
    vocab = Vocabulary(sorted(seen), oov_buckets=oov_buckets)
    return vocab, ArgVocabulary(sorted(arg_names))
