"""Referring expressions: realization, structured matching, uniqueness checks.

A reference is generated for a chosen target entity by sampling a method
(color, position, name, ...) and realizing a surface phrase; the method-value
pair must match the target and no other candidate in scope, otherwise another
method is sampled, with a bounded retry count and an ordinal fallback that is
unique by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..catalog import PRODUCT_CARD, Screen, VisualEntity, format_price, format_rating
from . import templates as TPL

# sampling keys; reference_type collapses the exact/superlative split
METHOD_KEYS = (
    "color", "position", "ordinal", "name",
    "price_exact", "price_superlative",
    "rating_exact", "rating_superlative",
    "prime", "item_type", "shape", "pattern",
)

DEFAULT_METHOD_WEIGHTS = {
    "position": 0.15,
    "ordinal": 0.13,
    "name": 0.15,
    "price_exact": 0.07,
    "price_superlative": 0.12,
    "rating_exact": 0.06,
    "rating_superlative": 0.10,
    "prime": 0.07,
    "item_type": 0.09,
    "shape": 0.03,
    "pattern": 0.03,
}

# visual-attribute heavy mix for the casual single-turn register
CASUAL_METHOD_WEIGHTS = {
    "shape": 0.09,
    "pattern": 0.09,
    "name": 0.12,
    "price_exact": 0.04,
    "price_superlative": 0.09,
    "rating_exact": 0.03,
    "rating_superlative": 0.08,
    "prime": 0.06,
    "item_type": 0.00,
}

HISTORICAL_BASE_METHODS = (
    "color", "name", "price_exact", "price_superlative",
    "rating_exact", "rating_superlative", "prime", "item_type", "shape", "pattern",
)


def reference_type_of(method_key: str) -> str:
    if method_key.startswith("price"):
        return "price"
    if method_key.startswith("rating"):
        return "rating"
    return method_key


@dataclass
class ReferringExpression:
    method: str                      # reference_type tag for the emitted example
    surface: str
    target_entity_id: str
    method_key: str = ""             # internal sampling key (exact vs superlative)
    value: object = None             # canonical constraint value
    comparative: bool = False
    historical: bool = False


class ExpressionError(Exception):
    pass


# ---------------------------------------------------------------------------
# structured matching


def match_indices(cards: Sequence[VisualEntity], method_key: str, value) -> List[int]:
    """Indices of scope cards matching a (method, value) constraint."""
    products = [c.product for c in cards]
    if method_key == "color":
        return [i for i, p in enumerate(products) if p.color == value]
    if method_key == "item_type":
        return [i for i, p in enumerate(products) if p.item_type == value]
    if method_key == "pattern":
        return [i for i, p in enumerate(products) if p.pattern == value]
    if method_key == "shape":
        return [i for i, p in enumerate(products) if p.shape == value]
    if method_key == "name":
        return [i for i, p in enumerate(products) if p.name == value]
    if method_key == "prime":
        return [i for i, p in enumerate(products) if p.prime_eligible]
    if method_key == "price_exact":
        return [i for i, p in enumerate(products) if abs(p.price - float(value)) < 0.005]
    if method_key == "rating_exact":
        return [i for i, p in enumerate(products) if abs(p.rating - float(value)) < 0.05]
    if method_key == "price_superlative":
        prices = [p.price for p in products]
        extreme = min(prices) if value == "min" else max(prices)
        return [i for i, p in enumerate(products) if abs(p.price - extreme) < 0.005]
    if method_key == "rating_superlative":
        ratings = [p.rating for p in products]
        extreme = min(ratings) if value == "min" else max(ratings)
        return [i for i, p in enumerate(products) if abs(p.rating - extreme) < 0.05]
    if method_key in ("position", "ordinal"):
        return [int(value)] if 0 <= int(value) < len(cards) else []
    if method_key == "anaphora":
        return [i for i, c in enumerate(cards) if c.highlighted]
    raise ExpressionError(f"unknown method key {method_key!r}")


def _historical_scope(screen: Screen, history: Sequence[Screen]) -> List[VisualEntity]:
    """Product cards visible in the history window but absent from the screen,
    de-duplicated keeping the most recent state."""
    current_ids = {e.entity_id for e in screen.entities}
    out: List[VisualEntity] = []
    seen = set(current_ids)
    for past in reversed(history):
        for e in past.entities:
            if e.kind == PRODUCT_CARD and e.entity_id not in seen:
                seen.add(e.entity_id)
                out.append(e)
    return out


def is_unique_reference(
    expr: ReferringExpression,
    screen: Screen,
    history: Sequence[Screen] = (),
) -> bool:
    """True iff exactly one candidate in scope matches the expression.

    Scope is the current screen's cards for non-historical methods and the
    history-window cards absent from the screen for historical ones.
    """
    if expr.historical:
        scope = _historical_scope(screen, history)
    else:
        scope = screen.product_cards()
    key = expr.method_key or expr.method
    return len(match_indices(scope, key, expr.value)) == 1


# ---------------------------------------------------------------------------
# realization


def _pick(rng: np.random.Generator, options: Sequence) -> object:
    return options[int(rng.integers(len(options)))]


def _realize(
    method_key: str,
    target: VisualEntity,
    cards: Sequence[VisualEntity],
    rng: np.random.Generator,
) -> Optional[Tuple[str, object]]:
    """Return (surface, constraint value) or None when inapplicable."""
    p = target.product
    t = TPL.REFERENCE_TEMPLATES
    if method_key == "color":
        return _pick(rng, t["color"]).format(value=p.color, item_type=p.item_type), p.color
    if method_key == "item_type":
        return _pick(rng, t["item_type"]).format(item_type=p.item_type), p.item_type
    if method_key == "name":
        return _pick(rng, t["name"]).format(name=p.name), p.name
    if method_key == "prime":
        if not p.prime_eligible:
            return None
        return _pick(rng, t["prime"]), True
    if method_key == "pattern":
        if p.pattern is None:
            return None
        return _pick(rng, t["pattern"]).format(value=p.pattern), p.pattern
    if method_key == "shape":
        if p.shape is None:
            return None
        word = TPL.SHAPE_SURFACE[p.shape]
        return _pick(rng, t["shape"]).format(word=word), p.shape
    if method_key == "price_exact":
        price = format_price(p.price)
        return _pick(rng, t["price_exact"]).format(price=price), p.price
    if method_key == "rating_exact":
        rating = format_rating(p.rating)
        return _pick(rng, t["rating_exact"]).format(rating=rating), p.rating
    if method_key == "price_superlative":
        prices = [c.product.price for c in cards]
        if not prices:
            return None
        if abs(p.price - min(prices)) < 0.005:
            kind = "min"
        elif abs(p.price - max(prices)) < 0.005:
            kind = "max"
        else:
            return None
        return _pick(rng, t[f"price_superlative_{kind}"]), kind
    if method_key == "rating_superlative":
        ratings = [c.product.rating for c in cards]
        if not ratings:
            return None
        if abs(p.rating - max(ratings)) < 0.05:
            kind = "max"
        elif abs(p.rating - min(ratings)) < 0.05:
            kind = "min"
        else:
            return None
        return _pick(rng, t[f"rating_superlative_{kind}"]), kind
    if method_key == "position":
        idx = _card_index(target, cards)
        n = len(cards)
        surfaces = []
        words = []
        if idx == 0:
            words += ["left", "leftmost"]
        if idx == n - 1 and n > 1:
            words += ["right", "rightmost"]
        if n % 2 == 1 and idx == n // 2 and n > 1:
            words += ["middle", "center"]
        for word in words:
            surfaces.extend(tpl.format(word=word) for tpl in t["position"])
        # end-anchored slots: resolving these requires knowing the screen width
        if n >= 3 and idx == n - 2:
            surfaces += ["the second one from the right", "the second from the right"]
        if n >= 3 and idx == 1:
            surfaces += ["the second one from the left", "the second from the left"]
        if not surfaces:
            return None
        return _pick(rng, surfaces), idx
    if method_key == "ordinal":
        idx = _card_index(target, cards)
        names = ["first", "second", "third", "fourth", "fifth"]
        words = [names[idx]] if idx < len(names) else []
        if idx == len(cards) - 1 and len(cards) > 1:
            words.append("last")
        if not words:
            return None
        template = _pick(rng, t["ordinal"])
        return template.format(word=_pick(rng, words), num=idx + 1), idx
    raise ExpressionError(f"unknown method key {method_key!r}")


def _card_index(target: VisualEntity, cards: Sequence[VisualEntity]) -> int:
    for i, c in enumerate(cards):
        if c.entity_id == target.entity_id:
            return i
    raise ExpressionError(f"target {target.entity_id} not among scope cards")


def _sample_methods(
    rng: np.random.Generator,
    weights: dict,
    attempts: int,
) -> List[str]:
    keys = list(weights)
    probs = np.array([weights[k] for k in keys], dtype=np.float64)
    probs = probs / probs.sum()
    return [keys[i] for i in rng.choice(len(keys), size=attempts, p=probs)]


def choose_reference(
    screen: Screen,
    target: VisualEntity,
    history: Sequence[Screen],
    rng: np.random.Generator,
    preferred_method: Optional[str] = None,
    method_weights: Optional[dict] = None,
    max_attempts: int = 20,
) -> ReferringExpression:
    """Build a unique reference to `target`.

    On-screen targets: sample methods (preferred first) and keep the first
    that passes the uniqueness check, falling back to an ordinal reference
    (always unique). Historical targets get a value-based phrase plus a
    recall marker, unique within the history scope; raises ExpressionError
    if no unique historical phrasing exists.
    """
    cards = screen.product_cards()
    on_screen = any(e.entity_id == target.entity_id for e in cards)
    if not on_screen:
        expr = _choose_historical(screen, target, history, rng, max_attempts)
        if expr is None:
            raise ExpressionError(f"no unique historical reference for {target.entity_id}")
        return expr

    weights = dict(method_weights or DEFAULT_METHOD_WEIGHTS)
    tried = _sample_methods(rng, weights, max_attempts)
    if preferred_method:
        tried = [preferred_method] + tried
    for key in tried:
        realized = _realize(key, target, cards, rng)
        if realized is None:
            continue
        surface, value = realized
        expr = ReferringExpression(
            method=reference_type_of(key),
            surface=surface,
            target_entity_id=target.entity_id,
            method_key=key,
            value=value,
            comparative=key.endswith("superlative"),
        )
        if is_unique_reference(expr, screen, history):
            return expr
    # ordinal fallback: slot indices are unique by construction
    idx = _card_index(target, cards)
    realized = _realize("ordinal", target, cards, rng)
    assert realized is not None
    surface, value = realized
    return ReferringExpression(
        method="ordinal",
        surface=surface,
        target_entity_id=target.entity_id,
        method_key="ordinal",
        value=idx,
    )


def _choose_historical(
    screen: Screen,
    target: VisualEntity,
    history: Sequence[Screen],
    rng: np.random.Generator,
    max_attempts: int,
) -> Optional[ReferringExpression]:
    scope = _historical_scope(screen, history)
    if not any(e.entity_id == target.entity_id for e in scope):
        raise ExpressionError(f"target {target.entity_id} not in history window")
    order = list(HISTORICAL_BASE_METHODS)
    rng.shuffle(order)
    marker = _pick(rng, TPL.HISTORICAL_MARKERS)
    for key in order[:max_attempts]:
        realized = _realize(key, target, scope, rng)
        if realized is None:
            continue
        surface, value = realized
        expr = ReferringExpression(
            method="historical",
            surface=f"{surface} {marker}",
            target_entity_id=target.entity_id,
            method_key=key,
            value=value,
            comparative=key.endswith("superlative"),
            historical=True,
        )
        if is_unique_reference(expr, screen, history):
            return expr
    return None
