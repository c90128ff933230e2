"""Multi-turn dialogue simulation and dataset emission.

Each dialogue runs the loop: pick targets on the current screen, phrase a
unique reference to each, pick an action pattern (single action, anaphora
follow-up, intent carryover, comparison, paging, historical recall), execute
it against the screen state, and emit one grounding example per visual
argument. Per-dialogue RNG streams are derived from (seed, dialogue index),
so generation is deterministic and parallelizable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..candidates import Candidate, CandidateSet, build_candidate_set
from ..catalog import Catalog, Screen, VisualEntity, format_price, format_rating
from ..data import GroundingExample, candidates_from_set, validate_example, write_examples
from . import templates as TPL
from .expressions import (
    CASUAL_METHOD_WEIGHTS,
    DEFAULT_METHOD_WEIGHTS,
    ExpressionError,
    ReferringExpression,
    choose_reference,
    _historical_scope,
)
from .state import (
    Action,
    API_ADD_TO_CART,
    API_COMPARE,
    API_GET_MATERIAL,
    API_GET_PRICE,
    API_GET_RATING,
    API_GO_BACK,
    API_NEXT_PAGE,
    API_SELECT,
    API_ZOOM,
    DialogueState,
    INQUIRY_APIS,
    SimulationError,
    apply_action,
    compare_action,
    generate_screen,
    new_dialogue_state,
    single_arg_action,
)

MODES = ("current_screen", "mixed_history", "singleturn")

PATTERN_WEIGHTS = {
    "current_screen": {
        "simple": 0.53,
        "anaphora_followup": 0.15,
        "intent_carryover": 0.12,
        "comparison": 0.13,
        "next_page": 0.07,
    },
    "mixed_history": {
        "simple": 0.36,
        "anaphora_followup": 0.10,
        "intent_carryover": 0.10,
        "comparison": 0.10,
        "next_page": 0.17,
        "go_back": 0.02,
        "historical_simple": 0.08,
        "historical_comparison": 0.07,
    },
}

CONTEXT_ENTRIES = 6  # three user/agent exchanges


@dataclass
class DatasetConfig:
    n_dialogues: int = 100
    max_len: int = 5
    n_products: int = 3
    min_products: Optional[int] = None   # set both to vary card count per page
    max_products: Optional[int] = None
    history_window: int = 3
    seed: int = 0
    mode: str = "current_screen"
    color_fraction: float = 0.17

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown simulation mode {self.mode!r}")
        if self.n_dialogues < 1 or self.max_len < 1 or self.n_products < 1:
            raise ValueError("n_dialogues, max_len and n_products must be >= 1")
        if (self.min_products is None) != (self.max_products is None):
            raise ValueError("set both or neither of min_products/max_products")
        if self.min_products is not None and not 1 <= self.min_products <= self.max_products:
            raise ValueError("need 1 <= min_products <= max_products")
        if not 0.0 <= self.color_fraction <= 1.0:
            raise ValueError("color_fraction must be in [0, 1]")

    def page_size_range(self) -> Optional[tuple]:
        # the single-turn import format keeps its fixed three-card screens
        if self.min_products is None or self.mode == "singleturn":
            return None
        return (self.min_products, self.max_products)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TurnRecord:
    user_utterances: List[str]
    actions: List[Action]
    screen_before: Screen
    screen_after: Screen


@dataclass
class Dialogue:
    dialogue_id: str
    seed_key: Tuple[int, int]
    max_len: int
    initial_screen: Screen
    turns: List[TurnRecord] = field(default_factory=list)


class _TurnBuilder:
    """Collects utterances/actions/examples while a turn group is emitted."""

    def __init__(self, gen: "_DialogueGenerator"):
        self.gen = gen
        self.utterances: List[str] = []
        self.actions: List[Action] = []
        self.screen_before = gen.state.screen.clone()

    def finish(self) -> TurnRecord:
        return TurnRecord(
            user_utterances=self.utterances,
            actions=self.actions,
            screen_before=self.screen_before,
            screen_after=self.gen.state.screen.clone(),
        )


class _DialogueGenerator:
    def __init__(self, catalog: Catalog, cfg: DatasetConfig, dialogue_index: int):
        self.cfg = cfg
        self.dialogue_index = dialogue_index
        self.rng = np.random.default_rng([cfg.seed, dialogue_index])
        self.dialogue_id = f"d{cfg.seed}-{dialogue_index}"
        self.state = new_dialogue_state(
            catalog, self.dialogue_id, cfg.n_products, self.rng,
            page_size_range=cfg.page_size_range(),
        )
        self.examples: List[GroundingExample] = []
        self.slot_count = 0
        self.color_count = 0
        # random phase makes the per-dialogue steering unbiased even though
        # dialogues are short and counters are dialogue-local
        self.color_offset = float(self.rng.random())
        self._example_counter = 0

    # -- references ---------------------------------------------------------

    def _weights(self) -> dict:
        return CASUAL_METHOD_WEIGHTS if self.cfg.mode == "singleturn" else DEFAULT_METHOD_WEIGHTS

    def _history_window(self) -> list:
        if self.cfg.mode != "mixed_history":
            return []
        return self.state.history[-self.cfg.history_window:]

    def pick_value_reference(
        self,
        exclude_methods: Set[str] = frozenset(),
        forbidden_targets: Set[str] = frozenset(),
    ) -> Tuple[VisualEntity, ReferringExpression]:
        """Choose a target card and a unique reference to it, steering the
        achieved color-reference rate toward the configured fraction."""
        state, rng = self.state, self.rng
        cards = state.screen.product_cards()
        pool = [c for c in cards if c.entity_id not in forbidden_targets]
        if not pool:
            raise SimulationError("no available target cards")
        want_color = (
            "color" not in exclude_methods
            and self.color_count + self.color_offset
            < self.cfg.color_fraction * (len(self.examples) + 1.4)
        )
        expr: Optional[ReferringExpression] = None
        target: Optional[VisualEntity] = None
        if want_color:
            colors = [c.product.color for c in cards]
            unique_color = [
                c for c in pool if colors.count(c.product.color) == 1
            ]
            if unique_color:
                target = unique_color[int(rng.integers(len(unique_color)))]
                expr = choose_reference(
                    state.screen, target, self._history_window(), rng,
                    preferred_method="color", method_weights=self._filtered_weights(exclude_methods),
                )
        if expr is None:
            target = pool[int(rng.integers(len(pool)))]
            expr = choose_reference(
                state.screen, target, self._history_window(), rng,
                method_weights=self._filtered_weights(exclude_methods),
            )
        self.slot_count += 1
        if expr.method == "color":
            self.color_count += 1
        return target, expr

    def _filtered_weights(self, exclude: Set[str]) -> dict:
        weights = {k: v for k, v in self._weights().items() if k not in exclude and v > 0}
        return weights or {"ordinal": 1.0}

    def pick_historical_reference(self) -> Optional[Tuple[VisualEntity, ReferringExpression]]:
        state, rng = self.state, self.rng
        scope = _historical_scope(state.screen, self._history_window())
        if not scope:
            return None
        target = scope[int(rng.integers(len(scope)))]
        try:
            expr = choose_reference(state.screen, target, self._history_window(), rng)
        except ExpressionError:
            return None
        self.slot_count += 1
        return target, expr

    # -- examples ------------------------------------------------------------

    def emit_example(
        self,
        utterance: str,
        api: str,
        arg_name: str,
        expr: ReferringExpression,
        candidates: CandidateSet,
    ) -> GroundingExample:
        gold = candidates.index_of(expr.target_entity_id)
        if gold < 0:
            raise SimulationError(f"gold {expr.target_entity_id} missing from candidates")
        self._example_counter += 1
        ex = GroundingExample(
            example_id=f"{self.dialogue_id}:x{self._example_counter}",
            dialogue_id=self.dialogue_id,
            turn_index=self.state.turn,
            dialogue_context=list(self.state.transcript[-CONTEXT_ENTRIES:]),
            utterance=utterance,
            api=api,
            arg_name=arg_name,
            arg_type="visual_entity",
            candidates=candidates_from_set(candidates),
            gold_index=gold,
            reference_type=expr.method,
            comparative=expr.comparative,
            history_required=not candidates.candidates[gold].on_current_screen,
        )
        validate_example(ex)
        self.examples.append(ex)
        return ex

    def current_candidates(self) -> CandidateSet:
        window = self.cfg.history_window if self.cfg.mode == "mixed_history" else 0
        return build_candidate_set(self.state.screen, self.state.history, window)

    # -- turn patterns --------------------------------------------------------

    def _sample_api(self, options: Sequence[str]) -> str:
        return options[int(self.rng.integers(len(options)))]

    def _method_exclusions(self, api: str) -> Set[str]:
        if api == API_GET_PRICE:
            return {"price_exact", "price_superlative"}
        if api == API_GET_RATING:
            return {"rating_exact", "rating_superlative"}
        return set()

    def _say(self, text: str) -> None:
        self.state.transcript.append(("user", text))

    def _agent(self, api: str, targets: Sequence[VisualEntity]) -> None:
        self.state.transcript.append(("agent", agent_response(api, targets)))

    def _do_single(self, turn: _TurnBuilder, api: str, target: VisualEntity, expr: ReferringExpression,
                   utterance: str, arg_name: str = "item") -> None:
        cands = self.current_candidates()
        self.emit_example(utterance, api, arg_name, expr, cands)
        self._say(utterance)
        action = single_arg_action(api, target.entity_id)
        turn.utterances.append(utterance)
        turn.actions.append(action)
        apply_action(self.state, action)
        self._agent(api, [target])

    def turn_simple(self, turn: _TurnBuilder) -> None:
        api = self._sample_api(list(INQUIRY_APIS) + [API_SELECT, API_ZOOM, API_ADD_TO_CART])
        target, expr = self.pick_value_reference(exclude_methods=self._method_exclusions(api))
        utterance = self._request(api, expr.surface)
        self._do_single(turn, api, target, expr, utterance)

    def turn_anaphora_followup(self, turn: _TurnBuilder) -> None:
        first_api = self._sample_api(list(INQUIRY_APIS) + [API_SELECT, API_ZOOM])
        target, expr = self.pick_value_reference(exclude_methods=self._method_exclusions(first_api))
        self._do_single(turn, first_api, target, expr, self._request(first_api, expr.surface))
        followups = [a for a in (API_ADD_TO_CART, API_SELECT, API_ZOOM) if a != first_api]
        second_api = self._sample_api(followups)
        word = TPL.REFERENCE_TEMPLATES["anaphora"][int(self.rng.integers(3))]
        utterance = TPL.FOLLOWUP_TEMPLATES[second_api][int(self.rng.integers(3))].format(ref=word)
        anaphor = ReferringExpression(
            method="anaphora", surface=word, target_entity_id=target.entity_id,
            method_key="anaphora", value=None,
        )
        self._do_single(turn, second_api, target, anaphor, utterance)

    def turn_intent_carryover(self, turn: _TurnBuilder) -> None:
        api = self._sample_api(list(INQUIRY_APIS))
        exclusions = self._method_exclusions(api)
        target, expr = self.pick_value_reference(exclude_methods=exclusions)
        self._do_single(turn, api, target, expr, self._request(api, expr.surface))
        second, expr2 = self.pick_value_reference(
            exclude_methods=exclusions, forbidden_targets={target.entity_id}
        )
        template = TPL.CARRYOVER_TEMPLATES[int(self.rng.integers(len(TPL.CARRYOVER_TEMPLATES)))]
        self._do_single(turn, api, second, expr2, template.format(ref=expr2.surface))

    def turn_comparison(self, turn: _TurnBuilder, historical_second: bool = False) -> None:
        first, expr1 = self.pick_value_reference()
        if historical_second:
            picked = self.pick_historical_reference()
            if picked is None:
                second, expr2 = self.pick_value_reference(forbidden_targets={first.entity_id})
            else:
                second, expr2 = picked
        else:
            second, expr2 = self.pick_value_reference(forbidden_targets={first.entity_id})
        template = TPL.REQUEST_TEMPLATES[API_COMPARE][int(self.rng.integers(3))]
        utterance = template.format(ref1=expr1.surface, ref2=expr2.surface)
        cands = self.current_candidates()
        self.emit_example(utterance, API_COMPARE, "first_item", expr1, cands)
        self.emit_example(utterance, API_COMPARE, "second_item", expr2, cands)
        self._say(utterance)
        action = compare_action(first.entity_id, second.entity_id)
        turn.utterances.append(utterance)
        turn.actions.append(action)
        apply_action(self.state, action)
        self._agent(API_COMPARE, [first, second])

    def turn_historical_simple(self, turn: _TurnBuilder) -> bool:
        picked = self.pick_historical_reference()
        if picked is None:
            return False
        target, expr = picked
        api = self._sample_api(list(INQUIRY_APIS) + [API_ADD_TO_CART])
        if api == API_GET_PRICE and expr.method_key.startswith("price"):
            api = API_GET_RATING
        if api == API_GET_RATING and expr.method_key.startswith("rating"):
            api = API_GET_MATERIAL
        self._do_single(turn, api, target, expr, self._request(api, expr.surface))
        return True

    def turn_page(self, turn: _TurnBuilder, api: str) -> None:
        utterance = TPL.REQUEST_TEMPLATES[api][int(self.rng.integers(3))]
        self._say(utterance)
        action = Action(api)
        turn.utterances.append(utterance)
        turn.actions.append(action)
        apply_action(self.state, action)
        self._agent(api, [])

    def _request(self, api: str, ref_surface: str) -> str:
        template = TPL.REQUEST_TEMPLATES[api][int(self.rng.integers(3))]
        return template.format(ref=ref_surface)

    # -- driver ---------------------------------------------------------------

    def sample_pattern(self) -> str:
        weights = dict(PATTERN_WEIGHTS[self.cfg.mode])
        if len(self.state.screen.product_cards()) < 2:
            weights.pop("comparison", None)
            weights.pop("intent_carryover", None)
        if not self.state.page_stack:
            weights.pop("go_back", None)
        if self.cfg.mode == "mixed_history" and not _historical_scope(
            self.state.screen, self._history_window()
        ):
            weights.pop("historical_simple", None)
            weights.pop("historical_comparison", None)
        names = list(weights)
        probs = np.array([weights[n] for n in names])
        probs = probs / probs.sum()
        return names[int(self.rng.choice(len(names), p=probs))]

    def run(self) -> Dialogue:
        dialogue = Dialogue(
            dialogue_id=self.dialogue_id,
            seed_key=(self.cfg.seed, self.dialogue_index),
            max_len=self.cfg.max_len,
            initial_screen=self.state.screen.clone(),
        )
        for _ in range(self.cfg.max_len):
            pattern = self.sample_pattern()
            turn = _TurnBuilder(self)
            if pattern == "simple":
                self.turn_simple(turn)
            elif pattern == "anaphora_followup":
                self.turn_anaphora_followup(turn)
            elif pattern == "intent_carryover":
                self.turn_intent_carryover(turn)
            elif pattern == "comparison":
                self.turn_comparison(turn)
            elif pattern == "historical_comparison":
                self.turn_comparison(turn, historical_second=True)
            elif pattern == "historical_simple":
                if not self.turn_historical_simple(turn):
                    self.turn_simple(turn)
            elif pattern == "next_page":
                self.turn_page(turn, API_NEXT_PAGE)
            elif pattern == "go_back":
                self.turn_page(turn, API_GO_BACK)
            else:  # pragma: no cover
                raise SimulationError(f"unknown pattern {pattern}")
            dialogue.turns.append(turn.finish())
        return dialogue


def _generate_singleturn(
    catalog: Catalog, cfg: DatasetConfig, dialogue_index: int
) -> Tuple[Dialogue, List[GroundingExample]]:
    gen = _DialogueGenerator(catalog, cfg, dialogue_index)
    target, expr = gen.pick_value_reference()
    template = TPL.CASUAL_TEMPLATES[int(gen.rng.integers(len(TPL.CASUAL_TEMPLATES)))]
    utterance = template.format(ref=expr.surface)
    cards = gen.state.screen.product_cards()
    cands = CandidateSet([Candidate(e, True) for e in cards])
    gen.emit_example(utterance, API_SELECT, "item", expr, cands)
    dialogue = Dialogue(
        dialogue_id=gen.dialogue_id,
        seed_key=(cfg.seed, dialogue_index),
        max_len=1,
        initial_screen=gen.state.screen.clone(),
        turns=[
            TurnRecord(
                user_utterances=[utterance],
                actions=[single_arg_action(API_SELECT, target.entity_id)],
                screen_before=gen.state.screen.clone(),
                screen_after=gen.state.screen.clone(),
            )
        ],
    )
    return dialogue, gen.examples


def generate_dialogue(
    catalog: Catalog, cfg: DatasetConfig, dialogue_index: int
) -> Tuple[Dialogue, List[GroundingExample]]:
    cfg.validate()
    if cfg.mode == "singleturn":
        return _generate_singleturn(catalog, cfg, dialogue_index)
    gen = _DialogueGenerator(catalog, cfg, dialogue_index)
    dialogue = gen.run()
    return dialogue, gen.examples


def simulate_dataset(catalog: Catalog, cfg: DatasetConfig, out_path) -> Dict:
    """Generate the full dataset and write it as JSON-lines; returns stats."""
    cfg.validate()
    all_examples: List[GroundingExample] = []
    for i in range(cfg.n_dialogues):
        _, examples = generate_dialogue(catalog, cfg, i)
        all_examples.extend(examples)
    n = write_examples(out_path, all_examples)
    counts: Dict[str, int] = {}
    for ex in all_examples:
        counts[ex.reference_type] = counts.get(ex.reference_type, 0) + 1
    return {
        "n_examples": n,
        "n_dialogues": cfg.n_dialogues,
        "reference_type_counts": dict(sorted(counts.items())),
        "config": cfg.to_dict(),
    }


def agent_response(api: str, targets: Sequence[VisualEntity]) -> str:
    template = TPL.AGENT_TEMPLATES[api]
    if api == API_COMPARE and len(targets) == 2:
        return template.format(
            price1=format_price(targets[0].product.price),
            price2=format_price(targets[1].product.price),
        )
    if targets and targets[0].product is not None:
        p = targets[0].product
        width, depth = TPL.fake_dimensions(p.feature_seed)
        return template.format(
            price=format_price(p.price),
            rating=format_rating(p.rating),
            material=p.material,
            name=p.name,
            width=width,
            depth=depth,
        )
    return template


def replay_dialogue(catalog: Catalog, cfg: DatasetConfig, dialogue: Dialogue) -> List[Screen]:
    """Re-execute a dialogue's actions from its seed; returns per-turn screens."""
    state = new_dialogue_state(
        catalog,
        dialogue.dialogue_id,
        cfg.n_products,
        np.random.default_rng(list(dialogue.seed_key)),
        page_size_range=cfg.page_size_range(),
    )
    screens = [state.screen.clone()]
    for turn in dialogue.turns:
        for action in turn.actions:
            apply_action(state, action)
        screens.append(state.screen.clone())
    return screens
