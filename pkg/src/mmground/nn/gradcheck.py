"""Central-difference verification of analytic gradients."""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .optim import ParameterStore
from .tensor import Tape, Tensor


def grad_check(
    loss_fn: Callable[[], Tensor],
    store: ParameterStore,
    eps: float = 1e-4,
    samples_per_tensor: int = 8,
    seed: int = 0,
    param_names: Optional[List[str]] = None,
) -> Tuple[float, Dict[str, float]]:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must be deterministic and read parameters from ``store`` by
    reference. Up to ``samples_per_tensor`` coordinates are probed per tensor.
    Returns (max relative error, per-tensor max relative error).
    """
    store.zero_grads()
    with Tape() as tape:
        loss = loss_fn()
        if not math.isfinite(loss.item()):
            raise ValueError(f"non-finite loss {loss.item()} during gradient check")
        tape.backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in store.params.items()
    }
    store.zero_grads()

    rng = np.random.default_rng(seed)
    names = param_names if param_names is not None else sorted(store.params)
    per_tensor: Dict[str, float] = {}
    worst = 0.0
    for name in names:
        t = store.params[name]
        flat = t.data.reshape(-1)
        n = flat.size
        coords = rng.choice(n, size=min(samples_per_tensor, n), replace=False)
        tensor_worst = 0.0
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss_fn().item()
            flat[idx] = orig - eps
            down = loss_fn().item()
            flat[idx] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise ValueError(f"non-finite loss while perturbing {name}[{idx}]")
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            tensor_worst = max(tensor_worst, rel)
        per_tensor[name] = tensor_worst
        worst = max(worst, tensor_worst)
    return worst, per_tensor
