"""Imported word vectors: frozen source matrix + learned projection."""

import numpy as np
import pytest

from mmground.model import ModelConfig
from mmground.model.io import load_model, save_model
from mmground.nn import Tape, adam_step
from mmground.training import TrainConfig, build_model, evaluate, train
from tests.conftest import make_examples


@pytest.fixture(scope="module")
def vector_file(tmp_path_factory, train_catalog):
    # cover a handful of frequent tokens; the rest fall back to random rows
    path = tmp_path_factory.mktemp("vectors") / "vecs.txt"
    rng = np.random.default_rng(5)
    tokens = ["the", "one", "blue", "red", "price", "rating", "left", "sofa", "chair"]
    lines = [
        " ".join([tok] + [f"{v:.6f}" for v in rng.normal(0, 0.4, 16)])
        for tok in tokens
    ]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_vector_file_round(train_catalog, vector_file):
    examples = make_examples(train_catalog, 20, seed=30)
    model = build_model(examples, ModelConfig(), seed=1, word_vectors_path=vector_file)
    assert model.cfg.pretrained_dim == 16
    assert "embed.word_src" in model.store
    assert "embed.word" not in model.store
    assert model.store.is_frozen("embed.word_src")

    src_before = model.store["embed.word_src"].data.copy()
    proj_before = model.store["embed.word_proj"].data.copy()
    encoded = model.encode_dataset(examples[:32])
    # two steps: the zero-initialized scorer blocks upstream gradients on
    # the very first update by construction
    for _ in range(2):
        with Tape() as tape:
            loss, _ = model.loss_batch(encoded)
            tape.backward(loss)
        assert model.store["embed.word_proj"].grad is not None
        adam_step(model.store, lr=0.002)
    assert np.array_equal(model.store["embed.word_src"].data, src_before)
    assert not np.array_equal(model.store["embed.word_proj"].data, proj_before)


def test_pretrained_model_trains_and_roundtrips(tmp_path, train_catalog, vector_file):
    examples = make_examples(train_catalog, 40, seed=31)
    model = build_model(examples, ModelConfig(), seed=2, word_vectors_path=vector_file)
    encoded = model.encode_dataset(examples)
    before = evaluate(model, examples).overall
    train(model, encoded, [], TrainConfig(batch_size=32, lr=0.002, epochs=6, seed=2, patience=6))
    after = evaluate(model, examples).overall
    assert after > before

    path = tmp_path / "pre.ckpt"
    save_model(path, model)
    loaded = load_model(path)
    assert loaded.cfg.pretrained_dim == 16
    assert loaded.store.is_frozen("embed.word_src")
    for ex in examples[:10]:
        a, b = model.ground(ex), loaded.ground(ex)
        assert a.chosen_entity_id == b.chosen_entity_id


def test_bad_vector_file_rejected(tmp_path, train_catalog):
    path = tmp_path / "bad.txt"
    path.write_text("solo\n")
    with pytest.raises(ValueError):
        build_model(
            make_examples(train_catalog, 5, seed=32), ModelConfig(), seed=1,
            word_vectors_path=str(path),
        )
