"""Candidate-set construction: current screen plus recent-history entities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

from .catalog import Screen, VisualEntity


@dataclass
class Candidate:
    entity: VisualEntity
    on_current_screen: bool


@dataclass
class CandidateSet:
    """Ordered, de-duplicated candidates: current entities first (in x order),
    then historical entities oldest-first."""

    candidates: List[Candidate]

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def entity_ids(self) -> List[str]:
        return [c.entity.entity_id for c in self.candidates]

    def index_of(self, entity_id: str) -> int:
        for i, c in enumerate(self.candidates):
            if c.entity.entity_id == entity_id:
                return i
        return -1


def build_candidate_set(current: Screen, history: List[Screen], window: int) -> CandidateSet:
    """Union of current-screen entities and entities from the last `window`
    prior screens, de-duplicated by entity_id keeping the most recent state."""
    if window < 0:
        raise ValueError("history window must be >= 0")
    out: List[Candidate] = [Candidate(e, True) for e in current.entities]
    seen = {e.entity_id for e in current.entities}
    historical: List[Tuple[tuple, VisualEntity]] = []
    scoped = history[-window:] if window > 0 else []
    for screen in reversed(scoped):  # newest first, so the first copy wins
        for e in screen.entities:
            if e.entity_id in seen:
                continue
            seen.add(e.entity_id)
            last_seen = e.last_visible_turn if e.last_visible_turn is not None else -1
            historical.append(((last_seen, e.x_position, e.entity_id), e))
    historical.sort(key=lambda pair: pair[0])  # oldest first
    out.extend(Candidate(e, False) for _, e in historical)
    ids = [c.entity.entity_id for c in out]
    assert len(ids) == len(set(ids))
    return CandidateSet(out)
