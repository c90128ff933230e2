"""Grounding example records and JSON-lines dataset IO.

One record per (utterance, API argument) pair: the dialogue context, the
candidate entities as seen when the utterance was issued, and the gold
candidate. The same schema is the import path for externally collected data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .candidates import CandidateSet
from .catalog import PRODUCT_CARD, VisualEntity

ARG_TYPE_VISUAL = "visual_entity"
ARG_TYPE_NONE = "none"
ARG_TYPES = (ARG_TYPE_VISUAL, ARG_TYPE_NONE)

REFERENCE_TYPES = (
    "color", "position", "ordinal", "name", "price", "rating", "prime",
    "item_type", "shape", "pattern", "anaphora", "historical",
)


class DatasetError(Exception):
    pass


@dataclass
class GroundingExample:
    example_id: str
    dialogue_id: str
    turn_index: int
    dialogue_context: List[Tuple[str, str]]
    utterance: str
    api: str
    arg_name: str
    arg_type: str
    candidates: List[dict]
    gold_index: int
    reference_type: str
    comparative: bool = False
    history_required: bool = False

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "dialogue_id": self.dialogue_id,
            "turn_index": self.turn_index,
            "dialogue_context": [[s, u] for s, u in self.dialogue_context],
            "utterance": self.utterance,
            "api": self.api,
            "arg_name": self.arg_name,
            "arg_type": self.arg_type,
            "candidates": self.candidates,
            "gold_index": self.gold_index,
            "reference_type": self.reference_type,
            "comparative": self.comparative,
            "history_required": self.history_required,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GroundingExample":
        return cls(
            example_id=str(raw["example_id"]),
            dialogue_id=str(raw.get("dialogue_id", "")),
            turn_index=int(raw["turn_index"]),
            dialogue_context=[(s, u) for s, u in raw.get("dialogue_context", [])],
            utterance=str(raw["utterance"]),
            api=str(raw["api"]),
            arg_name=str(raw["arg_name"]),
            arg_type=str(raw["arg_type"]),
            candidates=list(raw["candidates"]),
            gold_index=int(raw["gold_index"]),
            reference_type=str(raw["reference_type"]),
            comparative=bool(raw.get("comparative", False)),
            history_required=bool(raw.get("history_required", False)),
        )


def candidate_record(entity: VisualEntity, on_current_screen: bool) -> dict:
    rec = entity.to_dict()
    rec["on_current_screen"] = on_current_screen
    return rec


def candidates_from_set(cands: CandidateSet) -> List[dict]:
    return [candidate_record(c.entity, c.on_current_screen) for c in cands]


def validate_example(ex: GroundingExample) -> None:
    if not ex.candidates:
        raise DatasetError(f"{ex.example_id}: empty candidate list")
    if not 0 <= ex.gold_index < len(ex.candidates):
        raise DatasetError(
            f"{ex.example_id}: gold_index {ex.gold_index} out of range "
            f"({len(ex.candidates)} candidates)"
        )
    ids = [c["entity_id"] for c in ex.candidates]
    if len(ids) != len(set(ids)):
        raise DatasetError(f"{ex.example_id}: duplicate candidate entity_ids")
    if ex.arg_type not in ARG_TYPES:
        raise DatasetError(f"{ex.example_id}: unknown arg_type {ex.arg_type!r}")
    if ex.reference_type not in REFERENCE_TYPES:
        raise DatasetError(f"{ex.example_id}: unknown reference_type {ex.reference_type!r}")
    gold = ex.candidates[ex.gold_index]
    gold_current = bool(gold.get("on_current_screen"))
    if ex.history_required == gold_current:
        raise DatasetError(
            f"{ex.example_id}: history_required={ex.history_required} but gold "
            f"on_current_screen={gold_current}"
        )
    if ex.reference_type == "anaphora" and not gold.get("highlighted"):
        raise DatasetError(f"{ex.example_id}: anaphora example with unhighlighted gold")


def write_examples(path, examples: Iterable[GroundingExample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), separators=(",", ":")) + "\n")
            n += 1
    return n


def read_examples(path) -> List[GroundingExample]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    out: List[GroundingExample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(GroundingExample.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad example record: {exc}") from exc
    return out


def read_many(paths: Iterable) -> List[GroundingExample]:
    out: List[GroundingExample] = []
    for p in paths:
        out.extend(read_examples(p))
    return out


def reference_type_counts(examples: Iterable[GroundingExample]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for ex in examples:
        counts[ex.reference_type] = counts.get(ex.reference_type, 0) + 1
    return counts
