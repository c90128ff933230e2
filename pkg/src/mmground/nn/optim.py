"""Named parameter storage and the Adam update."""

from __future__ import annotations

import zlib
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .tensor import Tensor


class ParameterStore:
    """Named map of trainable tensors plus per-parameter Adam moments.

    Initialization is keyed by (store seed, parameter name) so it does not
    depend on creation order.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.params: Dict[str, Tensor] = {}
        self.frozen: set = set()          # stored but never updated (e.g. imported vectors)
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}
        self.step_count = 0

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(sorted(self.params.items()))

    def n_parameters(self) -> int:
        return sum(t.size for t in self.params.values())

    def get_or_create(self, name: str, shape: Tuple[int, ...], std: float = 0.1) -> Tensor:
        t = self.params.get(name)
        if t is not None:
            if t.shape != tuple(shape):
                raise ValueError(f"parameter {name!r} exists with shape {t.shape}, wanted {shape}")
            return t
        if std == 0.0:
            data = np.zeros(shape, dtype=np.float64)
        else:
            rng = np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])
            data = rng.normal(0.0, std, size=shape)
        t = Tensor(data, requires_grad=True, name=name)
        self.params[name] = t
        self._m[name] = np.zeros(shape, dtype=np.float64)
        self._v[name] = np.zeros(shape, dtype=np.float64)
        return t

    def put(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        self._m[name] = np.zeros(t.shape, dtype=np.float64)
        self._v[name] = np.zeros(t.shape, dtype=np.float64)
        return t

    def put_frozen(self, name: str, data: np.ndarray) -> Tensor:
        """A stored tensor that the optimizer never touches."""
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=False, name=name)
        self.params[name] = t
        self.frozen.add(name)
        return t

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def restore(self, snap: Dict[str, np.ndarray]) -> None:
        for name, data in snap.items():
            if name in self.params:
                self.params[name].data = data.copy()
            else:
                self.put(name, data)

    def is_frozen(self, name: str) -> bool:
        return name in self.frozen

    def reset_adam(self) -> None:
        self.step_count = 0
        for name in self._m:
            self._m[name][:] = 0.0
            self._v[name][:] = 0.0


def adam_step(
    store: ParameterStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam without weight decay; zeroes gradients afterwards."""
    missing = [
        name for name, t in store.params.items()
        if t.grad is None and name not in store.frozen
    ]
    if missing:
        raise ValueError(f"adam_step with missing gradients for: {sorted(missing)}")
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        if name in store.frozen:
            continue
        g = p.grad
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    store.zero_grads()
