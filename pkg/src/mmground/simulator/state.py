"""Dialogue state: screens, agent actions, and their execution semantics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..catalog import (
    BACK_BUTTON,
    Catalog,
    NEXT_PAGE_BUTTON,
    PRODUCT_CARD,
    Screen,
    VisualEntity,
)

API_GET_PRICE = "GET_PRICE"
API_GET_RATING = "GET_RATING"
API_GET_MATERIAL = "GET_MATERIAL"
API_GET_DIMENSIONS = "GET_DIMENSIONS"
API_SELECT = "SELECT"
API_ZOOM = "ZOOM"
API_ADD_TO_CART = "ADD_TO_CART"
API_COMPARE = "COMPARE"
API_NEXT_PAGE = "NEXT_PAGE"
API_GO_BACK = "GO_BACK"

ALL_APIS = (
    API_GET_PRICE, API_GET_RATING, API_GET_MATERIAL, API_GET_DIMENSIONS,
    API_SELECT, API_ZOOM, API_ADD_TO_CART, API_COMPARE, API_NEXT_PAGE, API_GO_BACK,
)
INQUIRY_APIS = (API_GET_PRICE, API_GET_RATING, API_GET_MATERIAL, API_GET_DIMENSIONS)
SINGLE_ARG_APIS = INQUIRY_APIS + (API_SELECT, API_ZOOM, API_ADD_TO_CART)


class SimulationError(Exception):
    pass


@dataclass
class ActionArg:
    arg_name: str
    arg_type: str              # "visual_entity" | "none"
    binding: Optional[str] = None

    def to_dict(self) -> dict:
        return {"arg_name": self.arg_name, "arg_type": self.arg_type, "binding": self.binding}


@dataclass
class Action:
    api: str
    args: List[ActionArg] = field(default_factory=list)

    def visual_args(self) -> List[ActionArg]:
        return [a for a in self.args if a.arg_type == "visual_entity"]

    def validate(self) -> None:
        if self.api not in ALL_APIS:
            raise SimulationError(f"unknown api {self.api!r}")
        n_visual = len(self.visual_args())
        if self.api == API_COMPARE and n_visual != 2:
            raise SimulationError("COMPARE requires exactly 2 visual args")
        if self.api in (API_NEXT_PAGE, API_GO_BACK) and n_visual != 0:
            raise SimulationError(f"{self.api} takes no visual args")
        if self.api in SINGLE_ARG_APIS and n_visual != 1:
            raise SimulationError(f"{self.api} requires exactly 1 visual arg")

    def to_dict(self) -> dict:
        return {"api": self.api, "args": [a.to_dict() for a in self.args]}


def single_arg_action(api: str, entity_id: str) -> Action:
    return Action(api, [ActionArg("item", "visual_entity", entity_id)])


def compare_action(first_id: str, second_id: str) -> Action:
    return Action(
        API_COMPARE,
        [
            ActionArg("first_item", "visual_entity", first_id),
            ActionArg("second_item", "visual_entity", second_id),
        ],
    )


class ProductFeed:
    """Deterministic stream of catalog products, drawn without replacement."""

    def __init__(self, catalog: Catalog, rng: np.random.Generator):
        self._products = list(catalog.products)
        self._order = rng.permutation(len(self._products))
        self._cursor = 0

    def draw(self, n: int):
        if self._cursor + n > len(self._order):
            raise SimulationError(
                f"catalog exhausted: wanted {n} more products, "
                f"{len(self._order) - self._cursor} left"
            )
        picked = [self._products[i] for i in self._order[self._cursor:self._cursor + n]]
        self._cursor += n
        return picked


@dataclass
class DialogueState:
    dialogue_id: str
    feed: ProductFeed
    n_products: int
    turn: int = 0                                  # increments per executed action
    screen: Screen = None                          # type: ignore[assignment]
    history: List[Screen] = field(default_factory=list)   # pre-action snapshots
    page_stack: List[Screen] = field(default_factory=list)
    transcript: List[tuple] = field(default_factory=list)
    page_sizes: List[int] = field(default_factory=list)   # pre-drawn, for replay
    _page_cursor: int = 0
    _entity_counter: int = 0
    go_back_warning: bool = False

    def next_entity_id(self) -> str:
        self._entity_counter += 1
        return f"{self.dialogue_id}:e{self._entity_counter}"

    def next_page_size(self) -> int:
        if self._page_cursor < len(self.page_sizes):
            size = self.page_sizes[self._page_cursor]
            self._page_cursor += 1
            return size
        return self.n_products


def generate_screen(
    state: DialogueState,
    n_products: int,
    turn: int,
    reuse_buttons: Optional[Sequence[VisualEntity]] = None,
) -> Screen:
    """Fresh page: n cards at slots 0..n-1 plus next/back buttons."""
    if n_products < 1:
        raise SimulationError("n_products must be >= 1")
    products = state.feed.draw(n_products)
    entities = [
        VisualEntity(
            entity_id=state.next_entity_id(),
            kind=PRODUCT_CARD,
            product=p,
            x_position=i,
            visibility=1.0,
            last_visible_turn=turn,
        )
        for i, p in enumerate(products)
    ]
    if reuse_buttons is not None:
        buttons = [b.clone() for b in reuse_buttons]
        for i, b in enumerate(buttons):
            b.x_position = n_products + i
            b.highlighted = False
    else:
        buttons = [
            VisualEntity(
                entity_id=f"{state.dialogue_id}:next",
                kind=NEXT_PAGE_BUTTON,
                x_position=n_products,
                last_visible_turn=turn,
            ),
            VisualEntity(
                entity_id=f"{state.dialogue_id}:back",
                kind=BACK_BUTTON,
                x_position=n_products + 1,
                last_visible_turn=turn,
            ),
        ]
    screen = Screen(turn_index=turn, entities=entities + buttons)
    screen.validate()
    return screen


def new_dialogue_state(
    catalog: Catalog,
    dialogue_id: str,
    n_products: int,
    rng: np.random.Generator,
    page_size_range: Optional[tuple] = None,
    max_pages: int = 64,
) -> DialogueState:
    """Fresh dialogue state. With `page_size_range` = (lo, hi), every page
    draws its card count from that range; sizes are pre-drawn so replaying
    the dialogue from its seed reproduces identical screens."""
    state = DialogueState(dialogue_id=dialogue_id, feed=ProductFeed(catalog, rng), n_products=n_products)
    if page_size_range is not None:
        lo, hi = page_size_range
        if not 1 <= lo <= hi:
            raise SimulationError(f"bad page size range {page_size_range}")
        state.page_sizes = [int(v) for v in rng.integers(lo, hi + 1, size=max_pages)]
    state.screen = generate_screen(state, state.next_page_size(), turn=0)
    return state


def find_entity(state: DialogueState, entity_id: str) -> Optional[VisualEntity]:
    for e in state.screen.entities:
        if e.entity_id == entity_id:
            return e
    return None


def apply_action(state: DialogueState, action: Action) -> DialogueState:
    """Execute an action against the dialogue state.

    Entity-scoped actions highlight the last on-screen bound entity and clear
    other highlights; bound on-screen entities record the selection turn.
    NEXT_PAGE swaps in fresh cards (buttons persist); GO_BACK restores the
    previous page, or is a warning no-op with no prior page. Every action
    advances the turn counter and stamps visible entities' last-visible turn.
    """
    action.validate()
    state.go_back_warning = False
    state.history.append(state.screen.clone())
    state.turn += 1
    t = state.turn

    if action.api == API_NEXT_PAGE:
        buttons = [e for e in state.screen.entities if e.kind != PRODUCT_CARD]
        state.page_stack.append(state.screen.clone())
        state.screen = generate_screen(state, state.next_page_size(), turn=t, reuse_buttons=buttons)
    elif action.api == API_GO_BACK:
        if not state.page_stack:
            state.go_back_warning = True
        else:
            restored = state.page_stack.pop().clone()
            restored.turn_index = t
            state.screen = restored
    else:
        for e in state.screen.entities:
            e.highlighted = False
        bound = [a.binding for a in action.visual_args()]
        if any(b is None for b in bound):
            raise SimulationError(f"{action.api}: unbound visual argument")
        on_screen = []
        for entity_id in bound:
            entity = find_entity(state, entity_id)
            if entity is not None:
                entity.last_selected_turn = t
                on_screen.append(entity)
        if on_screen:
            on_screen[-1].highlighted = True

    state.screen.turn_index = t
    for e in state.screen.entities:
        e.last_visible_turn = t
    state.screen.validate()
    return state
