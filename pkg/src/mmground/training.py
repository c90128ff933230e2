"""Training loop and evaluation with per-reference-type slice metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .catalog import SyntheticFeatureProvider
from .data import GroundingExample
from .model import ArgVocabulary, GroundingModel, ModelConfig, Vocabulary, build_vocab
from .model.grounder import EncodedExample, Prediction
from .nn import ParameterStore, Tape, adam_step


@dataclass
class TrainConfig:
    batch_size: int = 128
    lr: float = 0.001
    epochs: int = 10
    seed: int = 0
    patience: int = 5

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricsReport:
    """Overall accuracy plus slice accuracies keyed by reference type.

    `comparative` is an overlay slice (superlative references carry their
    base type); the count-weighted mean identity over slices holds for the
    reference-type partition, excluding the overlay.
    """

    overall: float
    slices: Dict[str, dict]
    n_examples: int
    n_gold_absent: int = 0
    config_digest: str = ""
    seed: int = 0
    loss_curve: List[float] = field(default_factory=list)

    OVERLAY_SLICES = ("comparative",)

    def slice_accuracy(self, name: str) -> Optional[float]:
        if name in self.slices:
            return self.slices[name]["accuracy"]
        return None

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "slices": self.slices,
            "n_examples": self.n_examples,
            "n_gold_absent": self.n_gold_absent,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "loss_curve": self.loss_curve,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = [f"overall accuracy: {self.overall:.4f} ({self.n_examples} examples)"]
        for name in sorted(self.slices):
            s = self.slices[name]
            tag = " (overlay)" if name in self.OVERLAY_SLICES else ""
            lines.append(f"  {name:<14} {s['accuracy']:.4f}  n={s['count']}{tag}")
        return "\n".join(lines)


def metrics_from_predictions(
    preds: Sequence[Prediction],
    config_digest: str = "",
    seed: int = 0,
) -> MetricsReport:
    if not preds:
        raise ValueError("no predictions to score")
    by_slice: Dict[str, List[bool]] = {}
    for p in preds:
        by_slice.setdefault(p.reference_type, []).append(p.correct)
        if p.comparative:
            by_slice.setdefault("comparative", []).append(p.correct)
    slices = {
        name: {"accuracy": float(np.mean(oks)), "count": len(oks)}
        for name, oks in by_slice.items()
        if oks
    }
    return MetricsReport(
        overall=float(np.mean([p.correct for p in preds])),
        slices=slices,
        n_examples=len(preds),
        n_gold_absent=sum(1 for p in preds if p.gold_absent),
        config_digest=config_digest,
        seed=seed,
    )


def iter_batches(n: int, size: int):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def evaluate_encoded(
    model: GroundingModel,
    encoded: Sequence[EncodedExample],
    batch_size: int = 256,
    seed: int = 0,
) -> MetricsReport:
    preds: List[Prediction] = []
    for lo, hi in iter_batches(len(encoded), batch_size):
        preds.extend(model.predict_batch(list(encoded[lo:hi])))
    return metrics_from_predictions(preds, config_digest=model.cfg.digest(), seed=seed)


def evaluate(model: GroundingModel, examples: Sequence[GroundingExample], **kw) -> MetricsReport:
    return evaluate_encoded(model, model.encode_dataset(examples), **kw)


def train(
    model: GroundingModel,
    train_set: Sequence[EncodedExample],
    dev_set: Sequence[EncodedExample],
    cfg: TrainConfig,
    log_fn=None,
) -> dict:
    """Seeded mini-batch training with Adam; keeps the best-dev snapshot.

    Returns the training log; the model's store is left at the best-dev
    parameters. Aborts with a diagnostic on non-finite loss.
    """
    cfg.validate()
    store = model.store
    best_snapshot = store.snapshot()
    best_dev = -1.0
    best_epoch = -1
    stale = 0
    log: dict = {
        "train_config": cfg.to_dict(),
        "model_digest": model.cfg.digest(),
        "n_train": len(train_set),
        "n_dev": len(dev_set),
        "epochs": [],
    }
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, 1000 + epoch]).permutation(len(train_set))
        losses: List[float] = []
        correct = 0
        counted = 0
        for lo, hi in iter_batches(len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[lo:hi]]
            if all(ex.gold_absent for ex in batch):
                continue
            with Tape() as tape:
                loss, chosen = model.loss_batch(batch)
            value = loss.item()
            if not math.isfinite(value):
                ids = [ex.example_id for ex in batch]
                raise RuntimeError(f"non-finite loss {value} on batch {ids[:5]}...")
            tape.backward(loss)
            adam_step(store, cfg.lr)
            losses.append(value)
            for ex, c in zip(batch, chosen):
                if not ex.gold_absent:
                    counted += 1
                    correct += int(c == ex.gold_index)
        train_acc = correct / max(counted, 1)
        dev_acc = (
            evaluate_encoded(model, dev_set, seed=cfg.seed).overall if dev_set else train_acc
        )
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)) if losses else 0.0,
            "train_accuracy": train_acc,
            "dev_accuracy": dev_acc,
        }
        log["epochs"].append(entry)
        if log_fn:
            log_fn(entry)
        if dev_acc > best_dev:
            best_dev = dev_acc
            best_epoch = epoch
            best_snapshot = store.snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    store.restore(best_snapshot)
    log["best_epoch"] = best_epoch
    log["best_dev_accuracy"] = best_dev
    return log


def build_model(
    train_examples: Sequence[GroundingExample],
    model_cfg: ModelConfig,
    seed: int,
    provider=None,
    word_vectors_path=None,
) -> GroundingModel:
    """Construct a model with a vocabulary built from the training corpus.

    With `word_vectors_path`, token embeddings come from the imported vectors
    (frozen) through a learned projection; tokens missing from the file get
    seeded random vectors.
    """
    vocab, args = build_vocab(
        train_examples,
        model_cfg.max_metadata_tokens,
        model_cfg.color_in_catalog,
        oov_buckets=model_cfg.oov_buckets,
    )
    if provider is None:
        provider = SyntheticFeatureProvider(model_cfg.visual_dim)
    store = ParameterStore(seed=seed)
    if word_vectors_path is not None:
        from .model.vocab import load_word_vectors

        dim, table = load_word_vectors(word_vectors_path)
        rng = np.random.default_rng([seed, 0x57E])
        scale = float(np.mean([np.linalg.norm(v) for v in table.values()])) / np.sqrt(dim)
        rows = np.empty((vocab.table_size, dim))
        for i, token in enumerate(vocab.tokens):
            rows[i] = table.get(token, rng.normal(0.0, scale, dim))
        rows[len(vocab.tokens):] = rng.normal(0.0, scale, (vocab.oov_buckets, dim))
        store.put_frozen("embed.word_src", rows)
        model_cfg.pretrained_dim = dim
    return GroundingModel(model_cfg, store, vocab, args, provider)


def train_pipeline(
    train_examples: Sequence[GroundingExample],
    dev_examples: Sequence[GroundingExample],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    provider=None,
    log_fn=None,
    word_vectors_path=None,
):
    """Vocab + model construction, dataset encoding, and training in one call."""
    model = build_model(
        train_examples, model_cfg, train_cfg.seed,
        provider=provider, word_vectors_path=word_vectors_path,
    )
    encoded_train = model.encode_dataset(train_examples)
    encoded_dev = model.encode_dataset(dev_examples)
    log = train(model, encoded_train, encoded_dev, train_cfg, log_fn=log_fn)
    return model, log
