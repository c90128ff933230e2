"""Binary checkpoint format.

Layout (all integers little-endian u32):

    magic "MMGC" | format version | header length | header JSON (UTF-8)
    | tensor count | per tensor: name length, name, rank, dims..., f32 payload

Payloads are float32 row-major; training math is float64, so a round trip
casts through float32.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .optim import ParameterStore

MAGIC = b"MMGC"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def _write_u32(fh, value: int) -> None:
    fh.write(struct.pack("<I", value))


def _read_u32(fh) -> int:
    raw = fh.read(4)
    if len(raw) != 4:
        raise CheckpointError("truncated checkpoint file")
    return struct.unpack("<I", raw)[0]


def save_checkpoint(path, store: ParameterStore, header: dict | None = None) -> None:
    header_bytes = json.dumps(header or {}, sort_keys=True).encode("utf-8")
    names = sorted(store.params)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write_u32(fh, FORMAT_VERSION)
        _write_u32(fh, len(header_bytes))
        fh.write(header_bytes)
        _write_u32(fh, len(names))
        for name in names:
            data = store.params[name].data
            encoded = name.encode("utf-8")
            _write_u32(fh, len(encoded))
            fh.write(encoded)
            _write_u32(fh, data.ndim)
            for dim in data.shape:
                _write_u32(fh, dim)
            fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_checkpoint(path) -> Tuple[dict, Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version = _read_u32(fh)
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header_len = _read_u32(fh)
        header = json.loads(fh.read(header_len).decode("utf-8")) if header_len else {}
        count = _read_u32(fh)
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            name_len = _read_u32(fh)
            name = fh.read(name_len).decode("utf-8")
            rank = _read_u32(fh)
            shape = tuple(_read_u32(fh) for _ in range(rank))
            n_items = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * n_items)
            if len(raw) != 4 * n_items:
                raise CheckpointError(f"truncated payload for tensor {name!r}")
            tensors[name] = (
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
            )
    return header, tensors


def store_from_tensors(tensors: Dict[str, np.ndarray], seed: int = 0) -> ParameterStore:
    store = ParameterStore(seed=seed)
    for name, data in tensors.items():
        store.put(name, data)
    return store
