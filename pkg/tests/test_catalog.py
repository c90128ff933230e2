"""Catalog loading, product validation, metadata flattening, feature providers."""

import json

import numpy as np
import pytest

from mmground.catalog import (
    CatalogError,
    FileFeatureProvider,
    MIN_FEATURE_DIM,
    Product,
    SyntheticFeatureProvider,
    VisualEntity,
    feature_segment_slices,
    generate_catalog,
    load_catalog,
    metadata_token_sequence,
    save_catalog,
)


def product(**overrides):
    base = dict(
        product_id="P1",
        name="oak desk",
        price=120.00,
        rating=4.0,
        prime_eligible=True,
        item_type="table",
        color="brown",
        material="wood",
        feature_seed=42,
    )
    base.update(overrides)
    return Product(**base)


def card(p, entity_id="e1", x=0):
    return VisualEntity(entity_id=entity_id, kind="product_card", product=p, x_position=x)


# -- loading -------------------------------------------------------------------

def test_load_three_lines(tmp_path):
    path = tmp_path / "cat.jsonl"
    cat = generate_catalog(3, seed=5)
    save_catalog(path, cat)
    loaded = load_catalog(path)
    assert len(loaded) == 3


def test_load_reports_line_number_for_bad_rating(tmp_path):
    path = tmp_path / "cat.jsonl"
    rows = [product(product_id=f"P{i}").to_dict() for i in range(3)]
    rows[1]["rating"] = 6.0
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(CatalogError, match=r":2: .*rating"):
        load_catalog(path)


def test_load_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "cat.jsonl"
    row = product().to_dict()
    path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
    with pytest.raises(CatalogError, match="duplicate"):
        load_catalog(path)


def test_load_rejects_empty(tmp_path):
    path = tmp_path / "cat.jsonl"
    path.write_text("")
    with pytest.raises(CatalogError, match="empty"):
        load_catalog(path)


def test_load_reports_json_error_line(tmp_path):
    path = tmp_path / "cat.jsonl"
    path.write_text(json.dumps(product().to_dict()) + "\n{not json\n")
    with pytest.raises(CatalogError, match=":2:"):
        load_catalog(path)


def test_roundtrip_field_for_field(tmp_path):
    path = tmp_path / "cat.jsonl"
    cat = generate_catalog(50, seed=9)
    save_catalog(path, cat)
    loaded = load_catalog(path)
    assert [p.to_dict() for p in loaded] == [p.to_dict() for p in cat]


@pytest.mark.slow
def test_50k_catalog_loads(tmp_path):
    path = tmp_path / "big.jsonl"
    save_catalog(path, generate_catalog(50_000, seed=1))
    assert len(load_catalog(path)) == 50_000


# -- metadata tokens --------------------------------------------------------------

def test_metadata_flattening_order():
    tokens = metadata_token_sequence(card(product()), max_len=24)
    assert tokens == [
        "name", "oak", "desk",
        "price", "120.00",
        "rating", "4.0",
        "prime", "true",
        "item_type", "table",
        "material", "wood",
    ]


def test_metadata_truncation():
    tokens = metadata_token_sequence(card(product()), max_len=4)
    assert tokens == ["name", "oak", "desk", "price"]


def test_metadata_buttons_yield_kind():
    back = VisualEntity(entity_id="b", kind="back_button", x_position=4)
    assert metadata_token_sequence(back, max_len=8) == ["back_button"]


def test_metadata_color_only_when_exposed():
    tokens = metadata_token_sequence(card(product()), max_len=24, color_in_catalog=False)
    assert "color" not in tokens and "brown" not in tokens
    tokens = metadata_token_sequence(card(product()), max_len=24, color_in_catalog=True)
    assert tokens[-2:] == ["color", "brown"]


def test_metadata_order_stable_under_field_order():
    # identical field values, permuted construction order
    a = Product(
        product_id="P9", name="pine shelf", price=50.0, rating=3.5,
        prime_eligible=False, item_type="shelf", color="white",
        material="wood", feature_seed=7,
    )
    raw = a.to_dict()
    permuted = {k: raw[k] for k in reversed(list(raw))}
    b = Product.from_dict(permuted)
    assert metadata_token_sequence(card(a)) == metadata_token_sequence(card(b))


# -- validation ---------------------------------------------------------------------

@pytest.mark.parametrize(
    "overrides,msg",
    [
        (dict(price=0.0), "price"),
        (dict(rating=0.5), "rating"),
        (dict(rating=5.5), "rating"),
        (dict(color="mauve"), "color"),
        (dict(item_type="boat"), "item_type"),
        (dict(pattern="zigzag"), "pattern"),
    ],
)
def test_product_validation(overrides, msg):
    with pytest.raises(CatalogError, match=msg):
        product(**overrides).validate()


def test_entity_invariants():
    with pytest.raises(ValueError, match="product"):
        VisualEntity(entity_id="x", kind="product_card", product=None).validate()
    e = card(product())
    e.last_visible_turn = 1
    e.last_selected_turn = 2
    with pytest.raises(ValueError, match="last_selected"):
        e.validate()


# -- synthetic features -----------------------------------------------------------------

def test_features_deterministic_over_many_entities():
    provider = SyntheticFeatureProvider(dim=50)
    cat = generate_catalog(1000, seed=3)
    for i, p in enumerate(cat):
        e = card(p, entity_id=f"e{i}")
        first = provider.features(e)
        second = provider.features(e)
        assert np.array_equal(first, second)


def test_features_differ_only_in_color_segment():
    provider = SyntheticFeatureProvider(dim=50)
    a = product(color="red", feature_seed=1)
    b = product(color="blue", feature_seed=2)
    fa = provider.features(card(a))
    fb = provider.features(card(b))
    segs = feature_segment_slices()
    assert not np.array_equal(fa[segs["color"]], fb[segs["color"]])
    for name in ("pattern", "shape", "item_type"):
        assert np.array_equal(fa[segs[name]], fb[segs[name]])
    # noise dims may differ (different seeds); code segments are one-hot
    code_end = max(s.stop for s in segs.values())
    assert not np.array_equal(fa[code_end:], fb[code_end:])


def test_features_buttons_zero():
    provider = SyntheticFeatureProvider(dim=50)
    btn = VisualEntity(entity_id="n", kind="next_page_button", x_position=3)
    assert np.array_equal(provider.features(btn), np.zeros(50))


def test_features_unit_norm_code_segments():
    provider = SyntheticFeatureProvider(dim=50)
    f = provider.features(card(product()))
    for seg in feature_segment_slices().values():
        assert abs(np.linalg.norm(f[seg]) - 1.0) < 1e-12


def test_feature_dim_too_small_rejected():
    with pytest.raises(ValueError, match="too small"):
        SyntheticFeatureProvider(dim=MIN_FEATURE_DIM - 1)
    SyntheticFeatureProvider(dim=MIN_FEATURE_DIM)  # boundary accepted


def test_file_backed_provider(tmp_path):
    p = product()
    path = tmp_path / "features.jsonl"
    vec = list(np.arange(50.0) / 50.0)
    path.write_text(json.dumps({"entity_key": p.product_id, "features": vec}) + "\n")
    provider = FileFeatureProvider(path, dim=50)
    assert np.allclose(provider.features(card(p)), vec)
    with pytest.raises(KeyError):
        provider.features(card(product(product_id="OTHER")))
