"""Surface realization banks for user references, requests, and agent replies.

Two registers: "simulated" (assistant-style requests) and "casual"
(single-turn product-selection phrasings). Every reference method carries at
least three paraphrases.
"""

from __future__ import annotations

POSITION_WORDS = {
    "left": 0, "leftmost": 0,
    "middle": "mid", "center": "mid",
    "right": -1, "rightmost": -1,
}
ORDINAL_WORDS = {"first": 0, "second": 1, "third": 2, "fourth": 3, "fifth": 4, "last": -1}

# surface word -> extreme kind, per numeric attribute
PRICE_SUPERLATIVES = {
    "cheapest": "min",
    "lowest priced": "min",
    "least expensive": "min",
    "most expensive": "max",
    "priciest": "max",
    "highest priced": "max",
}
RATING_SUPERLATIVES = {
    "highest rated": "max",
    "best rated": "max",
    "top rated": "max",
    "lowest rated": "min",
    "worst rated": "min",
}

SHAPE_SURFACE = {"round": "round", "square": "square", "rectangular": "rectangular", "l_shaped": "l shaped"}

HISTORICAL_MARKERS = (
    "you showed earlier",
    "you showed me before",
    "from before",
    "from the previous page",
)

REFERENCE_TEMPLATES = {
    "color": ("the {value} one", "the {value} {item_type}", "that {value} one"),
    "position": ("the {word} one", "the one on the {word}", "the {word} item"),
    "ordinal": ("the {word} one", "the {word} item", "item number {num}"),
    "name": ("the {name}", "the {name} one", "that {name}"),
    "price_exact": (
        "the {price} dollar one",
        "the one priced at {price} dollars",
        "the one that costs {price} dollars",
    ),
    "price_superlative_min": ("the cheapest one", "the lowest priced one", "the least expensive one"),
    "price_superlative_max": ("the most expensive one", "the priciest one", "the highest priced one"),
    "rating_exact": (
        "the {rating} star one",
        "the one rated {rating} stars",
        "the one with a {rating} star rating",
    ),
    "rating_superlative_max": ("the highest rated one", "the best rated one", "the top rated one"),
    "rating_superlative_min": ("the lowest rated one", "the worst rated one", "the one with the worst rating"),
    "prime": ("the prime one", "the prime eligible one", "the one with prime"),
    "item_type": ("the {item_type}", "that {item_type}", "the {item_type} on screen"),
    "shape": ("the {word} one", "the {word} shaped one", "the one with the {word} shape"),
    "pattern": ("the {value} one", "the {value} patterned one", "the one with the {value} pattern"),
    "anaphora": ("it", "that one", "this one"),
}

REQUEST_TEMPLATES = {
    "GET_PRICE": (
        "what is the price of {ref}?",
        "how much is {ref}?",
        "how much does {ref} cost?",
    ),
    "GET_RATING": (
        "what is the rating of {ref}?",
        "how many stars does {ref} have?",
        "what is the rating on {ref}?",
    ),
    "GET_MATERIAL": (
        "what material is {ref} made of?",
        "what is {ref} made from?",
        "what is the material of {ref}?",
    ),
    "GET_DIMENSIONS": (
        "what are the dimensions of {ref}?",
        "how big is {ref}?",
        "what size is {ref}?",
    ),
    "SELECT": ("select {ref}", "show me {ref}", "open {ref}"),
    "ZOOM": ("zoom in on {ref}", "zoom on {ref}", "enlarge {ref}"),
    "ADD_TO_CART": ("add {ref} to my cart", "put {ref} in my cart", "add {ref} to the cart"),
    "COMPARE": (
        "compare {ref1} and {ref2}",
        "is {ref1} cheaper than {ref2}?",
        "which is better, {ref1} or {ref2}?",
    ),
    "NEXT_PAGE": ("next page", "show me more", "show me the next page"),
    "GO_BACK": ("go back", "previous page", "take me back"),
}

FOLLOWUP_TEMPLATES = {
    "ADD_TO_CART": ("add {ref} to my cart", "put {ref} in my cart", "add {ref} to the cart"),
    "SELECT": ("select {ref}", "open {ref}", "show {ref} to me"),
    "ZOOM": ("zoom in on {ref}", "zoom on {ref}", "enlarge {ref}"),
}

CARRYOVER_TEMPLATES = ("how about {ref}?", "what about {ref}?", "and {ref}?")

CASUAL_TEMPLATES = (
    "i want {ref}",
    "give me {ref}",
    "{ref} please",
    "i will take {ref}",
    "let me see {ref}",
    "show me {ref}",
    "i like {ref}",
    "can i get {ref}",
)

AGENT_TEMPLATES = {
    "GET_PRICE": "The price is ${price}.",
    "GET_RATING": "It has a rating of {rating} stars.",
    "GET_MATERIAL": "It is made of {material}.",
    "GET_DIMENSIONS": "It measures {width} by {depth} inches.",
    "SELECT": "Here is the {name}.",
    "ZOOM": "Zooming in on the {name}.",
    "ADD_TO_CART": "Added the {name} to your cart.",
    "COMPARE": "The first costs ${price1} and the second costs ${price2}.",
    "NEXT_PAGE": "Here is the next page.",
    "GO_BACK": "Going back to the previous page.",
}


def fake_dimensions(feature_seed: int) -> tuple:
    # deterministic plausible size for GET_DIMENSIONS replies
    return 20 + feature_seed % 48, 18 + (feature_seed >> 8) % 44
