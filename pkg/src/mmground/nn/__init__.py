"""Differentiable-computation core: tensors, tape autodiff, encoders, Adam."""

from .tensor import Tape, Tensor  # noqa: F401
from .optim import ParameterStore, adam_step  # noqa: F401
from .gradcheck import grad_check  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint, store_from_tensors  # noqa: F401
from .layers import (  # noqa: F401
    attend,
    attend_single,
    bilinear_scores,
    bilinear_scores_batch,
    bilstm,
    bilstm_encode,
    self_attend,
    self_attend_single,
    sinusoid_rows,
    sinusoidal_embed,
)
