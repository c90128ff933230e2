"""One-shot preparation of demo assets: catalog, datasets, trained checkpoint."""

from __future__ import annotations

from pathlib import Path
from typing import Dict

from .catalog import generate_catalog, save_catalog
from .data import read_examples
from .model import ModelConfig
from .model.io import save_model
from .simulator import DatasetConfig, simulate_dataset
from .training import TrainConfig, train_pipeline


def prepare_demo(
    out_dir,
    seed: int = 7,
    n_dialogues: int = 400,
    epochs: int = 12,
    n_catalog: int = 2000,
) -> Dict[str, str]:
    """Build everything the session service needs into `out_dir`.

    The training mix includes casual single-turn selection phrasings so the
    model copes with the way people type into the demo.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog = generate_catalog(n_catalog, seed=seed)
    catalog_path = out / "catalog.jsonl"
    save_catalog(catalog_path, catalog)

    train_path = out / "train.jsonl"
    casual_path = out / "train_casual.jsonl"
    dev_path = out / "dev.jsonl"
    simulate_dataset(
        catalog,
        DatasetConfig(n_dialogues=n_dialogues, max_len=5, seed=seed, mode="current_screen"),
        train_path,
    )
    simulate_dataset(
        catalog,
        DatasetConfig(
            n_dialogues=max(n_dialogues // 2, 50),
            max_len=1,
            seed=seed + 1,
            mode="singleturn",
            color_fraction=0.5,
        ),
        casual_path,
    )
    simulate_dataset(
        catalog,
        DatasetConfig(n_dialogues=max(n_dialogues // 8, 20), max_len=5, seed=seed + 2,
                      mode="current_screen"),
        dev_path,
    )

    train_examples = read_examples(train_path) + read_examples(casual_path)
    dev_examples = read_examples(dev_path)
    model_cfg = ModelConfig()
    train_cfg = TrainConfig(batch_size=64, lr=0.002, epochs=epochs, seed=seed, patience=max(3, epochs))
    model, log = train_pipeline(train_examples, dev_examples, model_cfg, train_cfg)
    ckpt_path = out / "model.ckpt"
    save_model(ckpt_path, model, extra={"training_log": log})
    return {
        "catalog": str(catalog_path),
        "train": str(train_path),
        "train_casual": str(casual_path),
        "dev": str(dev_path),
        "checkpoint": str(ckpt_path),
        "best_dev_accuracy": f"{log['best_dev_accuracy']:.4f}",
    }
