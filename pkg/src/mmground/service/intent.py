"""Rule-based mapping from user utterances to API action skeletons.

Upstream action prediction is out of scope for the grounding model; the demo
service stands in with keyword rules. Unmatched utterances fall back to a
generic one-argument GET_INFO inquiry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from ..simulator.state import (
    API_ADD_TO_CART,
    API_COMPARE,
    API_GET_DIMENSIONS,
    API_GET_MATERIAL,
    API_GET_PRICE,
    API_GET_RATING,
    API_GO_BACK,
    API_NEXT_PAGE,
    API_SELECT,
    API_ZOOM,
)
from ..text import tokenize

API_GET_INFO = "GET_INFO"


@dataclass
class IntentSkeleton:
    api: str
    arg_names: List[str]      # visual-entity arguments to be filled


def _has_phrase(tokens: List[str], phrase: str) -> bool:
    words = phrase.split()
    n = len(words)
    return any(tokens[i:i + n] == words for i in range(len(tokens) - n + 1))


# (api, any-of token cues, any-of phrase cues, n visual args)
_RULES = (
    (API_COMPARE, ("compare", "cheaper", "versus", "vs"), ("which is better", "which one is better"), 2),
    (API_NEXT_PAGE, (), ("next page", "show me more", "more items", "more products"), 0),
    (API_GO_BACK, (), ("go back", "previous page", "take me back", "last page"), 0),
    (API_GET_PRICE, ("price", "cost", "costs"), ("how much",), 1),
    (API_GET_RATING, ("rating", "rated", "star", "stars"), (), 1),
    (API_GET_MATERIAL, ("material", "made"), (), 1),
    (API_GET_DIMENSIONS, ("dimensions", "size", "measurements", "wide", "tall", "big"), (), 1),
    (API_ZOOM, ("zoom", "enlarge"), ("closer look",), 1),
    (API_ADD_TO_CART, ("cart", "buy", "purchase", "basket"), (), 1),
    (API_SELECT, ("select", "show", "open", "pick", "choose", "see", "want"), (), 1),
)

_ARG_NAMES = {2: ["first_item", "second_item"], 1: ["item"], 0: []}


def parse_intent(utterance: str) -> IntentSkeleton:
    tokens = tokenize(utterance)
    if not tokens:
        raise ValueError("empty utterance")
    for api, token_cues, phrase_cues, n_args in _RULES:
        if any(t in tokens for t in token_cues) or any(_has_phrase(tokens, p) for p in phrase_cues):
            return IntentSkeleton(api=api, arg_names=list(_ARG_NAMES[n_args]))
    return IntentSkeleton(api=API_GET_INFO, arg_names=["item"])
