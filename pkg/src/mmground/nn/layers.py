"""Encoder building blocks: sinusoids, bi-directional LSTM, attention, bilinear scorer.

Batched entry points operate on (B, T, ...) tensors with explicit length
masks; thin single-sequence wrappers are provided for the common shapes.
Parameters live in a :class:`~mmground.nn.optim.ParameterStore` and are
created lazily under a caller-supplied name prefix.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from . import tensor as T
from .tensor import Tensor


def sinusoidal_embed(value: float, dim: int) -> np.ndarray:
    """Fixed sinusoidal code: out[2i] = sin(v / 10000^(2i/dim)), out[2i+1] = cos(same)."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError(f"sinusoidal dim must be even and >= 2, got {dim}")
    i = np.arange(dim // 2, dtype=np.float64)
    freq = 1.0 / np.power(10000.0, 2.0 * i / dim)
    out = np.empty(dim, dtype=np.float64)
    out[0::2] = np.sin(value * freq)
    out[1::2] = np.cos(value * freq)
    return out


def sinusoid_rows(values: np.ndarray, dim: int) -> np.ndarray:
    """Vectorized :func:`sinusoidal_embed` over a 1-D array of values."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError(f"sinusoidal dim must be even and >= 2, got {dim}")
    values = np.asarray(values, dtype=np.float64)
    i = np.arange(dim // 2, dtype=np.float64)
    freq = 1.0 / np.power(10000.0, 2.0 * i / dim)
    angles = values[:, None] * freq[None, :]
    out = np.empty((values.shape[0], dim), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


def _lengths_to_mask(lengths: np.ndarray, t_max: int) -> np.ndarray:
    return (np.arange(t_max)[None, :] < np.asarray(lengths)[:, None]).astype(np.float64)


def lstm_parameters(store, prefix: str, d: int, hidden: int):
    """Weight and bias for one LSTM direction; forget-gate bias starts at 1
    so early training carries token information across the sequence."""
    std = 1.0 / math.sqrt(d + hidden)
    w = store.get_or_create(f"{prefix}.W", (d + hidden, 4 * hidden), std=std)
    created = f"{prefix}.b" not in store
    b = store.get_or_create(f"{prefix}.b", (4 * hidden,), std=0.0)
    if created:
        b.data[hidden:2 * hidden] = 1.0
    return w, b


def bilstm(
    store,
    prefix: str,
    embeds: Tensor,
    lengths: np.ndarray,
    hidden: int,
) -> Tuple[Tensor, Tensor]:
    """Bi-directional LSTM over padded sequences.

    embeds: (B, T, d); lengths: (B,) valid token counts (>= 1).
    Returns per-position states (B, T, 2h) aligned to the original order, and
    the concatenated final states (B, 2h).
    """
    b, t_max, d = embeds.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    if np.any(lengths < 1):
        raise ValueError("bilstm requires every sequence length >= 1")
    mask = _lengths_to_mask(lengths, t_max)
    params = {
        direction: lstm_parameters(store, f"{prefix}.{direction}", d, hidden)
        for direction in ("fw", "bw")
    }

    def run(inputs: Tensor, w: Tensor, bias: Tensor):
        h = Tensor(np.zeros((b, hidden)))
        c = Tensor(np.zeros((b, hidden)))
        states = []
        for step in range(t_max):
            x_t = T.reshape(T.narrow(inputs, 1, step, 1), (b, d))
            h, c = T.lstm_step(x_t, h, c, w, bias, mask[:, step:step + 1])
            states.append(T.reshape(h, (b, 1, hidden)))
        return T.concat(states, axis=1), h

    states_fw, final_fw = run(embeds, *params["fw"])

    # process each row's tokens in reverse; realign states afterwards
    positions = np.arange(t_max)[None, :]
    rev_idx = np.maximum(lengths[:, None] - 1 - positions, 0)
    reversed_embeds = T.gather_time(embeds, rev_idx)
    states_bw_rev, final_bw = run(reversed_embeds, *params["bw"])
    states_bw = T.gather_time(states_bw_rev, rev_idx)

    states = T.concat([states_fw, states_bw], axis=2)
    final = T.concat([final_fw, final_bw], axis=1)
    return states, final


def bilstm_encode(
    store,
    prefix: str,
    tokens: np.ndarray,
    hidden: int,
) -> Tuple[Tensor, Tensor]:
    """Single-sequence wrapper: tokens (T, d) -> (states (T, 2h), final (2h,))."""
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValueError(f"expected a non-empty (T, d) token matrix, got {tokens.shape}")
    t_len, d = tokens.shape
    states, final = bilstm(
        store, prefix, Tensor(tokens.reshape(1, t_len, d)), np.array([t_len]), hidden
    )
    return T.reshape(states, (t_len, 2 * hidden)), T.reshape(final, (2 * hidden,))


def attend(
    store,
    prefix: str,
    query: Tensor,
    keys: Tensor,
    values: Tensor,
    token_mask: Optional[np.ndarray] = None,
) -> Tensor:
    """Scaled single-query attention with a learned query projection.

    query: (N, dq); keys: (N, T, dk); values: (N, T, dv); token_mask: (N, T)
    with True on valid tokens. Scores are (P q) . k_t / sqrt(dk).
    """
    n, t_len, dk = keys.shape
    dq = query.shape[1]
    proj = store.get_or_create(f"{prefix}.P", (dq, dk), std=1.0 / math.sqrt(dq))
    pq = T.matmul(query, proj)
    scores = T.matmul(keys, T.reshape(pq, (n, dk, 1)))
    scores = T.scale(T.reshape(scores, (n, t_len)), 1.0 / math.sqrt(dk))
    weights = T.masked_softmax(scores, token_mask, axis=1)
    out = T.matmul(T.reshape(weights, (n, 1, t_len)), values)
    return T.reshape(out, (n, values.shape[2]))


def attend_single(store, prefix: str, query, keys, values) -> Tensor:
    """Wrapper for one (query, key/value sequence) pair: returns (dv,)."""
    q = T.as_tensor(query)
    k = T.as_tensor(keys)
    v = T.as_tensor(values)
    t_len, dk = k.shape
    out = attend(
        store,
        prefix,
        T.reshape(q, (1, q.shape[0])),
        T.reshape(k, (1, t_len, dk)),
        T.reshape(v, (1, t_len, v.shape[1])),
    )
    return T.reshape(out, (v.shape[1],))


def self_attend(
    store,
    prefix: str,
    entities: Tensor,
    entity_mask: Optional[np.ndarray] = None,
    attn_dim: int = 50,
) -> Tensor:
    """Single-head scaled dot-product self-attention with a residual connection.

    entities: (B, N, d); entity_mask: (B, N) True on real rows. Padded rows
    are excluded as keys; their own outputs are garbage and must be masked
    downstream.
    """
    b, n, d = entities.shape
    std = 1.0 / math.sqrt(d)
    wq = store.get_or_create(f"{prefix}.Wq", (d, attn_dim), std=std)
    wk = store.get_or_create(f"{prefix}.Wk", (d, attn_dim), std=std)
    wv = store.get_or_create(f"{prefix}.Wv", (d, attn_dim), std=std)
    wo = store.get_or_create(f"{prefix}.Wo", (attn_dim, d), std=1.0 / math.sqrt(attn_dim))
    q = T.matmul(entities, wq)
    k = T.matmul(entities, wk)
    v = T.matmul(entities, wv)
    scores = T.scale(T.matmul(q, T.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(attn_dim))
    key_mask = None
    if entity_mask is not None:
        key_mask = np.asarray(entity_mask, dtype=bool)[:, None, :]
    weights = T.masked_softmax(scores, key_mask, axis=2)
    mixed = T.matmul(weights, v)
    return T.add(entities, T.matmul(mixed, wo))


def self_attend_single(store, prefix: str, entities, attn_dim: int = 50) -> Tensor:
    """Wrapper for one candidate set: entities (N, d) -> (N, d)."""
    e = T.as_tensor(entities)
    n, d = e.shape
    out = self_attend(store, prefix, T.reshape(e, (1, n, d)), None, attn_dim=attn_dim)
    return T.reshape(out, (n, d))


def bilinear_scores(q, entities, w) -> Tensor:
    """score_i = q^T W e_i for q (a,), entities (N, b), W (a, b) -> (N,)."""
    qt = T.as_tensor(q)
    et = T.as_tensor(entities)
    wt = T.as_tensor(w)
    a = qt.shape[0]
    n, bdim = et.shape
    if wt.shape != (a, bdim):
        raise ValueError(f"bilinear shape mismatch: q {qt.shape}, W {wt.shape}, E {et.shape}")
    u = T.matmul(T.reshape(qt, (1, a)), wt)          # (1, b)
    scores = T.matmul(et, T.transpose(u, (1, 0)))    # (N, 1)
    return T.reshape(scores, (n,))


def bilinear_scores_batch(q: Tensor, entities: Tensor, w: Tensor) -> Tensor:
    """Batched bilinear scores: q (B, a), entities (B, C, b), W (a, b) -> (B, C)."""
    b, _ = q.shape
    _, c, _ = entities.shape
    u = T.matmul(q, w)                                      # (B, b)
    scores = T.matmul(entities, T.reshape(u, (b, w.shape[1], 1)))  # (B, C, 1)
    return T.reshape(scores, (b, c))
