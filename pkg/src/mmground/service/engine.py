"""Session engine: per-session dialogue state, grounding, action execution.

Sessions are independent and in-memory; distinct sessions may be served
concurrently while requests within one session are serialized. An optional
state directory persists JSON snapshots for restart recovery.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..candidates import build_candidate_set
from ..catalog import Catalog, PRODUCT_CARD, Screen, format_price, format_rating
from ..data import GroundingExample, candidates_from_set
from ..model.grounder import GroundingModel, Prediction
from ..simulator.generate import agent_response
from ..simulator.state import (
    API_COMPARE,
    API_GO_BACK,
    API_NEXT_PAGE,
    Action,
    ActionArg,
    DialogueState,
    ProductFeed,
    apply_action,
    new_dialogue_state,
)
from .intent import API_GET_INFO, IntentSkeleton, parse_intent

CONTEXT_ENTRIES = 6


class SessionNotFound(Exception):
    pass


def screen_to_view(screen: Screen) -> dict:
    entities = []
    for e in screen.entities:
        row = {
            "entity_id": e.entity_id,
            "kind": e.kind,
            "x_position": e.x_position,
            "visibility": e.visibility,
            "highlighted": e.highlighted,
        }
        if e.kind == PRODUCT_CARD and e.product is not None:
            p = e.product
            row.update(
                {
                    "name": p.name,
                    "price": format_price(p.price),
                    "rating": format_rating(p.rating),
                    "prime": p.prime_eligible,
                    "swatch": {"color": p.color, "pattern": p.pattern, "shape": p.shape},
                }
            )
        entities.append(row)
    return {"turn_index": screen.turn_index, "schema_id": screen.schema_id, "entities": entities}


@dataclass
class Session:
    session_id: str
    seed: int
    state: DialogueState
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionEngine:
    def __init__(
        self,
        model: GroundingModel,
        catalog: Catalog,
        n_products: int = 3,
        clarify_margin: float = 0.1,
        state_dir: Optional[str] = None,
    ):
        self.model = model
        self.catalog = catalog
        self.n_products = n_products
        self.clarify_margin = clarify_margin
        self.state_dir = Path(state_dir) if state_dir else None
        if self.state_dir:
            self.state_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: Dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        self._counter = 0

    # -- session lifecycle ----------------------------------------------------

    def create_session(self, seed: Optional[int] = None) -> dict:
        with self._registry_lock:
            self._counter += 1
            n = self._counter
        if seed is None:
            seed = int(np.random.default_rng().integers(0, 2**31 - 1))
        session_id = f"s{n:06d}"
        state = new_dialogue_state(
            self.catalog, f"sess-{seed}", self.n_products, np.random.default_rng([seed])
        )
        session = Session(session_id=session_id, seed=seed, state=state)
        with self._registry_lock:
            self._sessions[session_id] = session
        self._persist(session)
        return {
            "session_id": session_id,
            "seed": seed,
            "screen": screen_to_view(state.screen),
        }

    def _get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def get_screen(self, session_id: str) -> dict:
        return screen_to_view(self._get(session_id).state.screen)

    def get_transcript(self, session_id: str) -> List[List[str]]:
        return [[s, t] for s, t in self._get(session_id).state.transcript]

    # -- grounding -------------------------------------------------------------

    def _ground_arg(self, state: DialogueState, utterance: str, api: str, arg_name: str) -> Prediction:
        cands = build_candidate_set(
            state.screen, state.history, self.model.cfg.history_window
        )
        record = GroundingExample(
            example_id=f"live:{state.dialogue_id}:{state.turn}:{arg_name}",
            dialogue_id=state.dialogue_id,
            turn_index=state.turn,
            dialogue_context=list(state.transcript[-CONTEXT_ENTRIES:]),
            utterance=utterance,
            api=api,
            arg_name=arg_name,
            arg_type="visual_entity",
            candidates=candidates_from_set(cands),
            gold_index=0,          # unused at inference
            reference_type="color",
            comparative=False,
            history_required=False,
        )
        return self.model.ground(record)

    def handle_utterance(self, session_id: str, text: str) -> dict:
        session = self._get(session_id)
        if not text or not text.strip():
            raise ValueError("empty utterance")
        with session.lock:
            response = self._handle_locked(session, text)
            self._persist(session)
            return response

    def _handle_locked(self, session: Session, text: str) -> dict:
        state = session.state
        intent = parse_intent(text)
        state.transcript.append(("user", text))

        if intent.api in (API_NEXT_PAGE, API_GO_BACK):
            action = Action(intent.api)
            apply_action(state, action)
            reply = agent_response(intent.api, [])
            if state.go_back_warning:
                reply = "There is no previous page."
            state.transcript.append(("agent", reply))
            return self._response(reply, action, [], state)

        grounded: List[dict] = []
        predictions: List[Prediction] = []
        for arg_name in intent.arg_names:
            pred = self._ground_arg(state, text, self._model_api(intent.api), arg_name)
            predictions.append(pred)
            grounded.append(
                {
                    "arg_name": arg_name,
                    "entity_id": pred.chosen_entity_id,
                    "score": pred.scores[pred.chosen_index],
                    "runner_up_margin": pred.margin,
                    "candidate_scores": [
                        {"entity_id": eid, "score": s, "prob": p}
                        for eid, s, p in zip(
                            self._candidate_ids(state), pred.scores, pred.probs
                        )
                    ],
                }
            )

        low_margin = [g for g in grounded if g["runner_up_margin"] < self.clarify_margin]
        if low_margin:
            reply = self._clarification_text(low_margin[0], state)
            state.transcript.append(("agent", reply))
            return self._response(reply, None, grounded, state, clarification=True)

        action = Action(
            intent.api,
            [
                ActionArg(g["arg_name"], "visual_entity", g["entity_id"])
                for g in grounded
            ],
        )
        targets = [self._entity_anywhere(state, g["entity_id"]) for g in grounded]
        if intent.api == API_GET_INFO:
            exec_action = Action("SELECT", action.args)  # highlight semantics
        else:
            exec_action = action
        apply_action(state, exec_action)
        reply = self._reply_text(intent.api, targets)
        state.transcript.append(("agent", reply))
        return self._response(reply, action, grounded, state)

    @staticmethod
    def _model_api(api: str) -> str:
        return api

    def _candidate_ids(self, state: DialogueState) -> List[str]:
        cands = build_candidate_set(state.screen, state.history, self.model.cfg.history_window)
        return cands.entity_ids()

    def _entity_anywhere(self, state: DialogueState, entity_id: str):
        for e in state.screen.entities:
            if e.entity_id == entity_id:
                return e
        for screen in reversed(state.history):
            for e in screen.entities:
                if e.entity_id == entity_id:
                    return e
        return None

    def _reply_text(self, api: str, targets) -> str:
        targets = [t for t in targets if t is not None]
        if api == API_GET_INFO:
            if targets and targets[0].product:
                p = targets[0].product
                return (
                    f"The {p.name} costs ${format_price(p.price)}, is rated "
                    f"{format_rating(p.rating)} stars and is made of {p.material}."
                )
            return "I could not find details for that item."
        if api == API_COMPARE and len(targets) == 2:
            return agent_response(API_COMPARE, targets)
        if targets:
            return agent_response(api, targets[:1])
        return "Done."

    def _clarification_text(self, grounded: dict, state: DialogueState) -> str:
        ranked = sorted(
            grounded["candidate_scores"], key=lambda c: c["prob"], reverse=True
        )[:2]
        names = []
        for cand in ranked:
            e = self._entity_anywhere(state, cand["entity_id"])
            if e is not None and e.product is not None:
                names.append(f"the {e.product.name}")
            else:
                names.append(cand["entity_id"])
        pair = " or ".join(names) if names else "one of the items"
        return f"I am not sure which item you mean: {pair}?"

    def _response(
        self,
        text: str,
        action: Optional[Action],
        grounded: List[dict],
        state: DialogueState,
        clarification: bool = False,
    ) -> dict:
        return {
            "text": text,
            "clarification": clarification,
            "action": action.to_dict() if action else None,
            "grounded": grounded,
            "screen": screen_to_view(state.screen),
            "transcript_length": len(state.transcript),
        }

    # -- persistence -------------------------------------------------------------

    def _persist(self, session: Session) -> None:
        if not self.state_dir:
            return
        state = session.state
        snapshot = {
            "session_id": session.session_id,
            "seed": session.seed,
            "turn": state.turn,
            "transcript": [[s, t] for s, t in state.transcript],
        }
        path = self.state_dir / f"{session.session_id}.json"
        path.write_text(json.dumps(snapshot, indent=2), encoding="utf-8")

    def recover_session(self, session_id: str) -> bool:
        """Rebuild a session from its snapshot by replaying the transcript."""
        if not self.state_dir:
            return False
        path = self.state_dir / f"{session_id}.json"
        if not path.exists():
            return False
        snap = json.loads(path.read_text(encoding="utf-8"))
        state = new_dialogue_state(
            self.catalog,
            f"sess-{snap['seed']}",
            self.n_products,
            np.random.default_rng([snap["seed"]]),
        )
        session = Session(session_id=session_id, seed=snap["seed"], state=state)
        with self._registry_lock:
            self._sessions[session_id] = session
        with session.lock:
            for speaker, text in snap["transcript"]:
                if speaker != "user":
                    continue
                self._handle_locked(session, text)
        return True
