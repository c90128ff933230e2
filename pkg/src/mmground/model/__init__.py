"""Grounding model: configuration, vocabularies, encoders, scorer."""

from .config import LOSS_BINARY_CE, LOSS_CROSS_ENTROPY, ModelConfig  # noqa: F401
from .grounder import EncodedExample, GroundingModel, Prediction  # noqa: F401
from .vocab import ArgVocabulary, Vocabulary, build_vocab  # noqa: F401
