"""Shared fixtures: catalogs, datasets, and a small trained model."""

import numpy as np
import pytest

from mmground.catalog import generate_catalog, save_catalog
from mmground.model import ModelConfig
from mmground.simulator import DatasetConfig, generate_dialogue
from mmground.training import TrainConfig, train_pipeline


def make_examples(catalog, n_dialogues, seed, mode="current_screen", max_len=5, **kw):
    cfg = DatasetConfig(
        n_dialogues=n_dialogues, max_len=max_len, seed=seed, mode=mode, **kw
    )
    out = []
    for i in range(n_dialogues):
        _, exs = generate_dialogue(catalog, cfg, i)
        out.extend(exs)
    return out


@pytest.fixture(scope="session")
def train_catalog():
    return generate_catalog(4000, seed=101)


@pytest.fixture(scope="session")
def eval_catalog():
    # disjoint product ids/names from the training catalog
    return generate_catalog(2000, seed=202)


@pytest.fixture(scope="session")
def trained_model(train_catalog):
    """Small but usable model: current-screen + casual data, a few epochs."""
    examples = make_examples(train_catalog, 420, seed=9)
    examples += make_examples(
        train_catalog, 220, seed=10, mode="singleturn", max_len=1, color_fraction=0.5
    )
    dev = make_examples(train_catalog, 40, seed=11)
    model, log = train_pipeline(
        examples, dev, ModelConfig(),
        TrainConfig(batch_size=64, lr=0.002, epochs=8, seed=2, patience=8),
    )
    model.training_log = log
    return model


@pytest.fixture(scope="session")
def service_assets(tmp_path_factory, trained_model, train_catalog):
    """Checkpoint + catalog on disk for service/CLI tests."""
    from mmground.model.io import save_model

    root = tmp_path_factory.mktemp("assets")
    ckpt = root / "model.ckpt"
    catalog_path = root / "catalog.jsonl"
    save_model(ckpt, trained_model)
    save_catalog(catalog_path, train_catalog)
    return {"ckpt": str(ckpt), "catalog": str(catalog_path)}
