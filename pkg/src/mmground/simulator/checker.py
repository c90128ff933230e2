"""Independent re-checker for emitted grounding examples.

Works purely from serialized records: it re-derives each reference's
constraint from the utterance TEXT (not from generator bookkeeping), then
verifies that exactly one in-scope candidate matches and that it is the gold
one. Sibling arguments of one utterance (COMPARE) are resolved left to right,
each scan starting after the previous argument's matched span.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..catalog import COLORS, ITEM_TYPES, PATTERNS, PRODUCT_CARD, SHAPES
from ..data import GroundingExample
from ..text import tokenize
from .templates import ORDINAL_WORDS, POSITION_WORDS, PRICE_SUPERLATIVES, RATING_SUPERLATIVES

_PRICE_RE = re.compile(r"^\d+\.\d\d$")
_RATING_RE = re.compile(r"^\d\.\d$")

_SHAPE_PHRASES = {("l", "shaped"): "l_shaped"}
for s in SHAPES:
    if "_" not in s:
        _SHAPE_PHRASES[(s,)] = s


class CheckFailure(Exception):
    pass


@dataclass
class Extraction:
    kind: str          # matcher kind
    value: object
    span_end: int      # token index just past the matched phrase


def _scan_phrases(tokens: Sequence[str], start: int, phrases: Dict[tuple, object]) -> Optional[Tuple[object, int, int]]:
    """Earliest occurrence (value, start, end) of any phrase at/after `start`;
    ties on start position prefer the longest phrase (nested names)."""
    best: Optional[Tuple[object, int, int]] = None
    for phrase, value in phrases.items():
        n = len(phrase)
        for i in range(start, len(tokens) - n + 1):
            if tuple(tokens[i:i + n]) == phrase:
                if best is None or i < best[1] or (i == best[1] and i + n > best[2]):
                    best = (value, i, i + n)
                break
    return best


def _extract(
    tokens: Sequence[str],
    start: int,
    reference_type: str,
    comparative: bool,
    candidate_names: Sequence[str],
    n_cards: int,
) -> Extraction:
    """Pull the constraint for one reference out of the utterance tokens."""
    if reference_type == "anaphora":
        return Extraction("anaphora", None, start)

    if reference_type == "historical":
        # historical phrases embed one attribute cue; try extractors from the
        # most specific (multi-token names) to the most generic
        for rt in ("name", "color", "shape", "pattern", "item_type", "price", "rating", "prime"):
            try:
                inner = _extract(tokens, start, rt, comparative, candidate_names, n_cards)
                return Extraction(f"historical:{inner.kind}", inner.value, inner.span_end)
            except CheckFailure:
                continue
        raise CheckFailure("no attribute cue found for historical reference")

    if reference_type == "color":
        hit = _scan_phrases(tokens, start, {(c,): c for c in COLORS})
        if not hit:
            raise CheckFailure("no color word in utterance")
        span_end = hit[2]
        # "the pink lamp": claim the trailing type word so sibling scans skip it
        if span_end < len(tokens) and tokens[span_end] in ITEM_TYPES:
            span_end += 1
        return Extraction("color", hit[0], span_end)

    if reference_type == "item_type":
        hit = _scan_phrases(tokens, start, {(t,): t for t in ITEM_TYPES})
        if not hit:
            raise CheckFailure("no item-type word in utterance")
        return Extraction("item_type", hit[0], hit[2])

    if reference_type == "pattern":
        hit = _scan_phrases(tokens, start, {(p,): p for p in PATTERNS})
        if not hit:
            raise CheckFailure("no pattern word in utterance")
        return Extraction("pattern", hit[0], hit[2])

    if reference_type == "shape":
        hit = _scan_phrases(tokens, start, dict(_SHAPE_PHRASES))
        if not hit:
            raise CheckFailure("no shape word in utterance")
        return Extraction("shape", hit[0], hit[2])

    if reference_type == "name":
        phrases = {tuple(tokenize(name)): name for name in candidate_names}
        hit = _scan_phrases(tokens, start, phrases)
        if not hit:
            raise CheckFailure("no candidate name in utterance")
        return Extraction("name", hit[0], hit[2])

    if reference_type == "prime":
        hit = _scan_phrases(tokens, start, {("prime",): True})
        if not hit:
            raise CheckFailure("no prime cue in utterance")
        return Extraction("prime", True, hit[2])

    if reference_type == "price":
        if comparative:
            phrases = {tuple(p.split()): kind for p, kind in PRICE_SUPERLATIVES.items()}
            hit = _scan_phrases(tokens, start, phrases)
            if not hit:
                raise CheckFailure("no price superlative in utterance")
            return Extraction("price_superlative", hit[0], hit[2])
        for i in range(start, len(tokens) - 1):
            if _PRICE_RE.match(tokens[i]) and tokens[i + 1] in ("dollar", "dollars"):
                return Extraction("price_exact", float(tokens[i]), i + 2)
        raise CheckFailure("no price amount in utterance")

    if reference_type == "rating":
        if comparative:
            phrases = {tuple(p.split()): kind for p, kind in RATING_SUPERLATIVES.items()}
            phrases[("worst", "rating")] = "min"
            hit = _scan_phrases(tokens, start, phrases)
            if not hit:
                raise CheckFailure("no rating superlative in utterance")
            return Extraction("rating_superlative", hit[0], hit[2])
        for i in range(start, len(tokens) - 1):
            if _RATING_RE.match(tokens[i]) and tokens[i + 1] in ("star", "stars"):
                return Extraction("rating_exact", float(tokens[i]), i + 2)
        raise CheckFailure("no star rating in utterance")

    if reference_type == "position":
        phrases: Dict[tuple, object] = {(w,): v for w, v in POSITION_WORDS.items()}
        phrases[("second", "from", "the", "right")] = "second_right"
        phrases[("second", "one", "from", "the", "right")] = "second_right"
        phrases[("second", "from", "the", "left")] = 1
        phrases[("second", "one", "from", "the", "left")] = 1
        hit = _scan_phrases(tokens, start, phrases)
        if not hit:
            raise CheckFailure("no position word in utterance")
        value = hit[0]
        if value == "mid":
            if n_cards % 2 == 0:
                raise CheckFailure("middle reference with even card count")
            idx = n_cards // 2
        elif value == "second_right":
            idx = n_cards - 2
        elif value == -1:
            idx = n_cards - 1
        else:
            idx = int(value)
        return Extraction("position", idx, hit[2])

    if reference_type == "ordinal":
        candidates_found = []
        hit = _scan_phrases(tokens, start, {(w,): v for w, v in ORDINAL_WORDS.items()})
        if hit:
            candidates_found.append(hit)
        for i in range(start, len(tokens) - 1):
            if tokens[i] == "number" and tokens[i + 1].isdigit():
                candidates_found.append((int(tokens[i + 1]) - 1, i, i + 2))
                break
        if not candidates_found:
            raise CheckFailure("no ordinal word in utterance")
        value, _, span_end = min(candidates_found, key=lambda h: h[1])
        idx = n_cards - 1 if value == -1 else int(value)
        return Extraction("ordinal", idx, span_end)

    raise CheckFailure(f"unknown reference type {reference_type!r}")


def _matches(candidates: Sequence[dict], kind: str, value) -> List[int]:
    """Indices of candidates matching an extracted constraint."""
    if kind.startswith("historical:"):
        kind = kind.split(":", 1)[1]
    out = []
    cards = [(i, c) for i, c in enumerate(candidates) if c["kind"] == PRODUCT_CARD]
    if kind == "anaphora":
        return [i for i, c in cards if c.get("highlighted")]
    if kind in ("position", "ordinal"):
        return [i for rank, (i, _) in enumerate(cards) if rank == value]
    if kind == "price_superlative":
        prices = [c["product"]["price"] for _, c in cards]
        extreme = min(prices) if value == "min" else max(prices)
        return [i for i, c in cards if abs(c["product"]["price"] - extreme) < 0.005]
    if kind == "rating_superlative":
        ratings = [c["product"]["rating"] for _, c in cards]
        extreme = min(ratings) if value == "min" else max(ratings)
        return [i for i, c in cards if abs(c["product"]["rating"] - extreme) < 0.05]
    for i, c in cards:
        p = c["product"]
        if kind == "color" and p["color"] == value:
            out.append(i)
        elif kind == "item_type" and p["item_type"] == value:
            out.append(i)
        elif kind == "pattern" and p.get("pattern") == value:
            out.append(i)
        elif kind == "shape" and p.get("shape") == value:
            out.append(i)
        elif kind == "name" and p["name"] == value:
            out.append(i)
        elif kind == "prime" and p["prime_eligible"]:
            out.append(i)
        elif kind == "price_exact" and abs(p["price"] - float(value)) < 0.005:
            out.append(i)
        elif kind == "rating_exact" and abs(p["rating"] - float(value)) < 0.05:
            out.append(i)
    return out


def check_example(ex: GroundingExample, scan_start: int = 0) -> int:
    """Verify one example; returns the token index just past its reference.

    Raises CheckFailure when the utterance does not yield exactly one matching
    in-scope candidate, or the match is not the gold one.
    """
    tokens = tokenize(ex.utterance)
    if ex.history_required:
        scope = [c for c in ex.candidates if not c.get("on_current_screen")]
    else:
        scope = [c for c in ex.candidates if c.get("on_current_screen")]
    names = [
        c["product"]["name"] for c in scope
        if c["kind"] == PRODUCT_CARD and c.get("product")
    ]
    n_cards = sum(1 for c in scope if c["kind"] == PRODUCT_CARD)
    extraction = _extract(
        tokens, scan_start,
        "historical" if ex.history_required else ex.reference_type,
        ex.comparative, names, n_cards,
    )
    matched = _matches(scope, extraction.kind, extraction.value)
    if len(matched) != 1:
        raise CheckFailure(
            f"{ex.example_id}: constraint {extraction.kind}={extraction.value!r} "
            f"matched {len(matched)} in-scope candidates"
        )
    gold_entity = ex.candidates[ex.gold_index]["entity_id"]
    matched_entity = scope[matched[0]]["entity_id"]
    if matched_entity != gold_entity:
        raise CheckFailure(
            f"{ex.example_id}: unique match {matched_entity} is not gold {gold_entity}"
        )
    return extraction.span_end


def check_dataset(examples: Sequence[GroundingExample]) -> Tuple[int, List[str]]:
    """Re-check every example; sibling COMPARE args share a left-to-right scan.

    Returns (n_passed, failure messages).
    """
    failures: List[str] = []
    passed = 0
    i = 0
    while i < len(examples):
        group = [examples[i]]
        j = i + 1
        while (
            j < len(examples)
            and examples[j].dialogue_id == examples[i].dialogue_id
            and examples[j].turn_index == examples[i].turn_index
            and examples[j].utterance == examples[i].utterance
        ):
            group.append(examples[j])
            j += 1
        start = 0
        for ex in group:
            try:
                start = check_example(ex, scan_start=start)
                passed += 1
            except CheckFailure as exc:
                failures.append(str(exc))
                start = len(tokenize(ex.utterance))
        i = j
    return passed, failures
