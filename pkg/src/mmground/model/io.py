"""Model checkpoint save/load with config + vocabulary header."""

from __future__ import annotations

from ..catalog import SyntheticFeatureProvider
from ..nn import ParameterStore, load_checkpoint, save_checkpoint, store_from_tensors
from .config import ModelConfig
from .grounder import GroundingModel
from .vocab import ArgVocabulary, Vocabulary


def save_model(path, model: GroundingModel, extra: dict | None = None) -> None:
    header = {
        "model_config": model.cfg.to_dict(),
        "vocab": model.vocab.to_dict(),
        "args": model.args.to_dict(),
        "frozen": sorted(model.store.frozen),
    }
    if extra:
        header["extra"] = extra
    save_checkpoint(path, model.store, header)


def load_model(path, provider=None) -> GroundingModel:
    header, tensors = load_checkpoint(path)
    cfg = ModelConfig.from_dict(header["model_config"])
    vocab = Vocabulary.from_dict(header["vocab"])
    args = ArgVocabulary.from_dict(header["args"])
    store = store_from_tensors(tensors)
    for name in header.get("frozen", []):
        if name in store.params:
            store.frozen.add(name)
            store.params[name].requires_grad = False
    if provider is None:
        provider = SyntheticFeatureProvider(cfg.visual_dim)
    return GroundingModel(cfg, store, vocab, args, provider)
