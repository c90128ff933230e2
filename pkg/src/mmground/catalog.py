"""Products, on-screen visual entities, and pluggable visual-feature providers.

The catalog file format is UTF-8 JSON-lines, one product object per line.
Visual features come from either a deterministic synthetic renderer (attribute
one-hots plus seeded noise) or a precomputed-feature file keyed by entity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

ITEM_TYPES = ("sofa", "chair", "table", "lamp", "shelf", "bed")
COLORS = (
    "red", "blue", "green", "black", "white", "grey",
    "brown", "yellow", "orange", "purple", "pink", "beige",
)
MATERIALS = ("wood", "metal", "leather", "fabric", "glass", "plastic")
PATTERNS = ("solid", "striped", "checkered", "floral", "dotted")
SHAPES = ("round", "square", "rectangular", "l_shaped")

PRODUCT_CARD = "product_card"
NEXT_PAGE_BUTTON = "next_page_button"
BACK_BUTTON = "back_button"
ENTITY_KINDS = (PRODUCT_CARD, NEXT_PAGE_BUTTON, BACK_BUTTON)


class CatalogError(Exception):
    """Raised on malformed catalog files or invalid product fields."""


def format_price(price: float) -> str:
    return f"{price:.2f}"


def format_rating(rating: float) -> str:
    return f"{rating:.1f}"


@dataclass(frozen=True)
class Product:
    product_id: str
    name: str
    price: float
    rating: float
    prime_eligible: bool
    item_type: str
    color: str
    material: str
    feature_seed: int
    pattern: Optional[str] = None
    shape: Optional[str] = None

    def validate(self) -> None:
        if not self.product_id:
            raise CatalogError("product_id must be non-empty")
        if not self.name:
            raise CatalogError(f"{self.product_id}: name must be non-empty")
        if not self.price > 0:
            raise CatalogError(f"{self.product_id}: price must be > 0, got {self.price}")
        if not 1.0 <= self.rating <= 5.0:
            raise CatalogError(
                f"{self.product_id}: rating must be in [1.0, 5.0], got {self.rating}"
            )
        if self.item_type not in ITEM_TYPES:
            raise CatalogError(f"{self.product_id}: unknown item_type {self.item_type!r}")
        if self.color not in COLORS:
            raise CatalogError(f"{self.product_id}: unknown color {self.color!r}")
        if self.material not in MATERIALS:
            raise CatalogError(f"{self.product_id}: unknown material {self.material!r}")
        if self.pattern is not None and self.pattern not in PATTERNS:
            raise CatalogError(f"{self.product_id}: unknown pattern {self.pattern!r}")
        if self.shape is not None and self.shape not in SHAPES:
            raise CatalogError(f"{self.product_id}: unknown shape {self.shape!r}")

    def to_dict(self) -> dict:
        return {
            "product_id": self.product_id,
            "name": self.name,
            "price": round(self.price, 2),
            "rating": round(self.rating, 1),
            "prime_eligible": self.prime_eligible,
            "item_type": self.item_type,
            "color": self.color,
            "material": self.material,
            "pattern": self.pattern,
            "shape": self.shape,
            "feature_seed": self.feature_seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Product":
        try:
            product = cls(
                product_id=str(raw["product_id"]),
                name=str(raw["name"]),
                price=float(raw["price"]),
                rating=float(raw["rating"]),
                prime_eligible=bool(raw["prime_eligible"]),
                item_type=str(raw["item_type"]),
                color=str(raw["color"]),
                material=str(raw["material"]),
                pattern=raw.get("pattern"),
                shape=raw.get("shape"),
                feature_seed=int(raw["feature_seed"]),
            )
        except KeyError as exc:
            raise CatalogError(f"missing product field {exc.args[0]!r}") from exc
        product.validate()
        return product


@dataclass
class VisualEntity:
    """One addressable element on screen: a product card or a nav button."""

    entity_id: str
    kind: str
    product: Optional[Product] = None
    x_position: int = 0
    visibility: float = 1.0
    highlighted: bool = False
    last_visible_turn: Optional[int] = None
    last_selected_turn: Optional[int] = None

    def validate(self) -> None:
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"{self.entity_id}: unknown entity kind {self.kind!r}")
        if (self.kind == PRODUCT_CARD) != (self.product is not None):
            raise ValueError(f"{self.entity_id}: product must be present iff kind is product_card")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"{self.entity_id}: visibility {self.visibility} outside [0, 1]")
        if self.x_position < 0:
            raise ValueError(f"{self.entity_id}: x_position must be >= 0")
        if (
            self.last_selected_turn is not None
            and self.last_visible_turn is not None
            and self.last_selected_turn > self.last_visible_turn
        ):
            raise ValueError(f"{self.entity_id}: last_selected_turn after last_visible_turn")

    def clone(self) -> "VisualEntity":
        return replace(self)

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "kind": self.kind,
            "product": self.product.to_dict() if self.product else None,
            "x_position": self.x_position,
            "visibility": self.visibility,
            "highlighted": self.highlighted,
            "last_visible_turn": self.last_visible_turn,
            "last_selected_turn": self.last_selected_turn,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "VisualEntity":
        return cls(
            entity_id=str(raw["entity_id"]),
            kind=str(raw["kind"]),
            product=Product.from_dict(raw["product"]) if raw.get("product") else None,
            x_position=int(raw["x_position"]),
            visibility=float(raw.get("visibility", 1.0)),
            highlighted=bool(raw.get("highlighted", False)),
            last_visible_turn=raw.get("last_visible_turn"),
            last_selected_turn=raw.get("last_selected_turn"),
        )


@dataclass
class Screen:
    """Ordered entity list for one turn: the visual context."""

    turn_index: int
    entities: List[VisualEntity]
    schema_id: str = "search_results"

    def validate(self) -> None:
        positions = [e.x_position for e in self.entities]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValueError(f"screen {self.turn_index}: x_positions must strictly increase")
        highlighted = [e for e in self.entities if e.kind == PRODUCT_CARD and e.highlighted]
        if len(highlighted) > 1:
            raise ValueError(f"screen {self.turn_index}: more than one highlighted card")
        for e in self.entities:
            e.validate()

    def product_cards(self) -> List[VisualEntity]:
        return [e for e in self.entities if e.kind == PRODUCT_CARD]

    def clone(self) -> "Screen":
        return Screen(
            turn_index=self.turn_index,
            entities=[e.clone() for e in self.entities],
            schema_id=self.schema_id,
        )


class Catalog:
    def __init__(self, products: Sequence[Product]):
        if not products:
            raise CatalogError("catalog is empty")
        self.products: List[Product] = list(products)
        self.by_id: Dict[str, Product] = {}
        for p in self.products:
            if p.product_id in self.by_id:
                raise CatalogError(f"duplicate product_id {p.product_id!r}")
            self.by_id[p.product_id] = p

    def __len__(self) -> int:
        return len(self.products)

    def __iter__(self):
        return iter(self.products)


def load_catalog(path) -> Catalog:
    path = Path(path)
    if not path.exists():
        raise CatalogError(f"catalog file not found: {path}")
    products: List[Product] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                products.append(Product.from_dict(raw))
            except CatalogError as exc:
                raise CatalogError(f"{path}:{lineno}: {exc}") from exc
    return Catalog(products)


def save_catalog(path, catalog: Catalog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for product in catalog.products:
            fh.write(json.dumps(product.to_dict(), separators=(",", ":")) + "\n")


NAME_MODIFIERS = (
    "oak", "walnut", "pine", "velvet", "linen", "rustic", "modern", "classic",
    "compact", "deluxe", "nordic", "vintage", "industrial", "plush", "folding",
    "adjustable", "corner", "tufted", "woven", "lacquered",
)
NAME_NOUNS = {
    "sofa": ("sofa", "couch", "loveseat", "sectional"),
    "chair": ("chair", "armchair", "recliner", "stool"),
    "table": ("table", "desk", "console", "nightstand"),
    "lamp": ("lamp", "floor lamp", "desk lamp", "lantern"),
    "shelf": ("shelf", "bookcase", "rack", "cabinet"),
    "bed": ("bed", "daybed", "bunk bed", "futon"),
}
# shared price/rating grids keep numeric surface tokens in-vocabulary across
# catalogs generated from different seeds
PRICE_GRID = tuple(round(9.99 + 10.0 * k, 2) for k in range(100))
RATING_GRID = tuple(round(1.0 + 0.1 * k, 1) for k in range(41))


def generate_catalog(n_products: int, seed: int, id_prefix: str = "P") -> Catalog:
    """Synthesize a catalog of random products (deterministic per seed)."""
    if n_products < 1:
        raise CatalogError("n_products must be >= 1")
    rng = np.random.default_rng([seed, 0x6A7])
    products = []
    for k in range(n_products):
        item_type = ITEM_TYPES[rng.integers(len(ITEM_TYPES))]
        mods = [NAME_MODIFIERS[rng.integers(len(NAME_MODIFIERS))]]
        if rng.random() < 0.55:  # part of the catalog carries longer names
            extra = NAME_MODIFIERS[rng.integers(len(NAME_MODIFIERS))]
            if extra not in mods:
                mods.append(extra)
        name = " ".join(mods) + " " + NAME_NOUNS[item_type][rng.integers(len(NAME_NOUNS[item_type]))]
        products.append(
            Product(
                product_id=f"{id_prefix}{seed}-{k:06d}",
                name=name,
                price=PRICE_GRID[rng.integers(len(PRICE_GRID))],
                rating=RATING_GRID[rng.integers(len(RATING_GRID))],
                prime_eligible=bool(rng.random() < 0.5),
                item_type=item_type,
                color=COLORS[rng.integers(len(COLORS))],
                material=MATERIALS[rng.integers(len(MATERIALS))],
                pattern=PATTERNS[rng.integers(len(PATTERNS))] if rng.random() < 0.6 else None,
                shape=SHAPES[rng.integers(len(SHAPES))] if rng.random() < 0.6 else None,
                feature_seed=int(rng.integers(0, 2**63 - 1)),
            )
        )
    return Catalog(products)


# ---------------------------------------------------------------------------
# metadata token sequences

METADATA_PROPERTY_ORDER = ("name", "price", "rating", "prime", "item_type", "material")


def metadata_token_sequence(
    entity: VisualEntity,
    max_len: int = 24,
    color_in_catalog: bool = False,
) -> List[str]:
    """Flatten an entity's metadata into alternating property/value tokens.

    Property order is fixed; numeric values render canonically (2 dp prices,
    1 dp ratings). Color is included only when the catalog exposes it, so that
    color resolution normally flows through visual features. Buttons flatten
    to their kind token.
    """
    if entity.kind != PRODUCT_CARD:
        return [entity.kind][:max_len]
    p = entity.product
    assert p is not None
    tokens: List[str] = []
    values = {
        "name": p.name.split(),
        "price": [format_price(p.price)],
        "rating": [format_rating(p.rating)],
        "prime": ["true" if p.prime_eligible else "false"],
        "item_type": [p.item_type],
        "material": [p.material],
    }
    order = list(METADATA_PROPERTY_ORDER)
    if color_in_catalog:
        values["color"] = [p.color]
        order.append("color")
    for prop in order:
        tokens.append(prop)
        tokens.extend(values[prop])
    return tokens[:max_len]


# ---------------------------------------------------------------------------
# visual feature providers

_SEGMENTS = (
    ("color", COLORS, False),
    ("pattern", PATTERNS, True),    # +1 slot for "absent"
    ("shape", SHAPES, True),
    ("item_type", ITEM_TYPES, False),
)
CODE_DIMS = sum(len(vals) + (1 if opt else 0) for _, vals, opt in _SEGMENTS)
MIN_FEATURE_DIM = CODE_DIMS + 1  # at least one noise dimension
FEATURE_NOISE_STD = 0.05


def feature_segment_slices() -> Dict[str, slice]:
    out: Dict[str, slice] = {}
    offset = 0
    for name, vals, opt in _SEGMENTS:
        width = len(vals) + (1 if opt else 0)
        out[name] = slice(offset, offset + width)
        offset += width
    return out


class SyntheticFeatureProvider:
    """Deterministic attribute renderer standing in for an image encoder.

    Each attribute segment is a one-hot code (unit norm); remaining dims are
    Gaussian noise seeded by the product's feature_seed. Buttons get zeros.
    """

    mode = "synthetic"

    def __init__(self, dim: int = 50):
        if dim < MIN_FEATURE_DIM:
            raise ValueError(
                f"feature dim {dim} too small: needs >= {MIN_FEATURE_DIM} "
                f"({CODE_DIMS} code dims + noise)"
            )
        self.dim = dim

    def features(self, entity: VisualEntity) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        if entity.kind != PRODUCT_CARD:
            return out
        p = entity.product
        assert p is not None
        offset = 0
        for name, vals, opt in _SEGMENTS:
            width = len(vals) + (1 if opt else 0)
            value = getattr(p, name)
            if value is None:
                out[offset + width - 1] = 1.0
            else:
                out[offset + vals.index(value)] = 1.0
            offset += width
        rng = np.random.default_rng(p.feature_seed)
        out[offset:] = rng.normal(0.0, FEATURE_NOISE_STD, size=self.dim - offset)
        return out


class FileFeatureProvider:
    """Precomputed features from a JSON-lines file of {entity_key, features}.

    Product cards are keyed by product_id; buttons get zeros.
    """

    mode = "file-backed"

    def __init__(self, path, dim: int = 50):
        self.dim = dim
        self._table: Dict[str, np.ndarray] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                vec = np.asarray(raw["features"], dtype=np.float64)
                if vec.shape != (dim,):
                    raise ValueError(
                        f"feature file line {lineno}: expected {dim} dims, got {vec.shape}"
                    )
                self._table[str(raw["entity_key"])] = vec

    def features(self, entity: VisualEntity) -> np.ndarray:
        if entity.kind != PRODUCT_CARD:
            return np.zeros(self.dim, dtype=np.float64)
        key = entity.product.product_id
        if key not in self._table:
            raise KeyError(f"no precomputed features for entity key {key!r}")
        return self._table[key]
