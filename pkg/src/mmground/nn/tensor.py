"""Dense float64 tensors with reverse-mode autodiff over an explicit tape.

The engine is intentionally small: every op is a free function over
:class:`Tensor` that records a backward closure on the active :class:`Tape`.
Op execution order is a valid topological order, so the backward pass walks
the tape in reverse. Calling ops with no active tape gives plain forward
computation (inference mode) with no bookkeeping overhead.
"""

from __future__ import annotations

import threading
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

_STATE = threading.local()


def _active_tape() -> Optional["Tape"]:
    return getattr(_STATE, "tape", None)


class Tensor:
    """A dense float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


class Tape:
    """Records backward closures in execution order.

    Usage::

        with Tape() as tape:
            loss = model_loss(...)
        tape.backward(loss)

    Tapes are tracked per-thread; concurrent workers each own their tape.
    """

    def __init__(self):
        self._backward_fns: List[Callable[[], None]] = []
        self._prev: Optional[Tape] = None

    def __enter__(self) -> "Tape":
        self._prev = _active_tape()
        _STATE.tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _STATE.tape = self._prev
        self._prev = None

    def record(self, fn: Callable[[], None]) -> None:
        self._backward_fns.append(fn)

    def __len__(self) -> int:
        return len(self._backward_fns)

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._backward_fns):
            fn()


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.shape != t.data.shape:
        raise ValueError(f"gradient shape {g.shape} != tensor shape {t.data.shape}")
    if t.grad is None:
        # always copy: the same upstream array may feed several tensors
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs > 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor]) -> Tuple[Tensor, Optional[Tape]]:
    tape = _active_tape()
    needs = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    return out, (tape if needs else None)


# ---------------------------------------------------------------------------
# elementwise / arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out, tape = _result(a.data + b.data, (a, b))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(a, _unbroadcast(g, a.shape))
            _accum(b, _unbroadcast(g, b.shape))
        tape.record(bwd)
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out, tape = _result(a.data - b.data, (a, b))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(a, _unbroadcast(g, a.shape))
            _accum(b, _unbroadcast(-g, b.shape))
        tape.record(bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out, tape = _result(a.data * b.data, (a, b))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(a, _unbroadcast(g * b.data, a.shape))
            _accum(b, _unbroadcast(g * a.data, b.shape))
        tape.record(bwd)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out, tape = _result(a.data * s, (a,))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * s)
        tape.record(bwd)
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out, tape = _result(y, (a,))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * (1.0 - y * y))
        tape.record(bwd)
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh formulation is stable for large |x|
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)
    out, tape = _result(y, (a,))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * y * (1.0 - y))
        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul expects >=2-D operands, got {a.shape} @ {b.shape}")
    out, tape = _result(np.matmul(a.data, b.data), (a, b))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            if a.requires_grad:
                da = np.matmul(g, np.swapaxes(b.data, -1, -2))
                _accum(a, _unbroadcast(da, a.shape))
            if b.requires_grad:
                db = np.matmul(np.swapaxes(a.data, -1, -2), g)
                _accum(b, _unbroadcast(db, b.shape))
        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# shape ops


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    out, tape = _result(a.data.reshape(shape), (a,))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad.reshape(a.shape))
        tape.record(bwd)
    return out


def transpose(a: Tensor, axes: Tuple[int, ...]) -> Tensor:
    out, tape = _result(np.transpose(a.data, axes).copy(), (a,))
    if tape is not None:
        inv = np.argsort(axes)
        def bwd():
            if out.grad is not None:
                _accum(a, np.transpose(out.grad, inv))
        tape.record(bwd)
    return out


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out, tape = _result(np.concatenate([p.data for p in parts], axis=axis), parts)
    if tape is not None:
        sizes = [p.data.shape[axis] for p in parts]
        offsets = np.cumsum([0] + sizes)
        def bwd():
            g = out.grad
            if g is None:
                return
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accum(p, g[tuple(idx)])
        tape.record(bwd)
    return out


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out, tape = _result(a.data[idx].copy(), (a,))
    if tape is not None:
        def bwd():
            if out.grad is None:
                return
            full = np.zeros_like(a.data)
            full[idx] = out.grad
            _accum(a, full)
        tape.record(bwd)
    return out


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out, tape = _result(a.data.sum(axis=axis, keepdims=keepdims), (a,))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            if axis is None:
                _accum(a, np.broadcast_to(g, a.shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.shape).copy())
        tape.record(bwd)
    return out


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# gathers


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Index-select along axis 0; `ids` may have any shape.

    Backward scatter-adds into the table, which makes this double as the
    embedding-lookup op.
    """
    ids = np.asarray(ids)
    out, tape = _result(table.data[ids], (table,))
    if tape is not None:
        def bwd():
            if out.grad is None:
                return
            full = np.zeros_like(table.data)
            np.add.at(full, ids, out.grad)
            _accum(table, full)
        tape.record(bwd)
    return out


def gather_time(a: Tensor, idx: np.ndarray) -> Tensor:
    """out[b, t] = a[b, idx[b, t]] for a of shape (B, T, D)."""
    idx = np.asarray(idx)
    out, tape = _result(np.take_along_axis(a.data, idx[:, :, None], axis=1), (a,))
    if tape is not None:
        rows = np.arange(a.shape[0])[:, None]
        def bwd():
            if out.grad is None:
                return
            full = np.zeros_like(a.data)
            np.add.at(full, (rows, idx), out.grad)
            _accum(a, full)
        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# softmax family


def _masked_softmax_forward(x: np.ndarray, mask: Optional[np.ndarray], axis: int) -> np.ndarray:
    if mask is None:
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
    else:
        neg = np.where(mask, x, -np.inf)
        mx = neg.max(axis=axis, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        e = np.exp(np.clip(x - mx, -745.0, 60.0)) * mask
    denom = np.maximum(e.sum(axis=axis, keepdims=True), 1e-300)
    return e / denom


def masked_softmax(a: Tensor, mask: Optional[np.ndarray] = None, axis: int = -1) -> Tensor:
    """Softmax over `axis`; positions where mask is False get probability 0.

    `mask` is a plain boolean array broadcastable to `a`; rows with no valid
    position yield all-zero probabilities.
    """
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    y = _masked_softmax_forward(a.data, mask, axis)
    out, tape = _result(y, (a,))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            dot = (g * y).sum(axis=axis, keepdims=True)
            _accum(a, y * (g - dot))
        tape.record(bwd)
    return out


def softmax_cross_entropy(
    scores: Tensor,
    gold: np.ndarray,
    valid: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Batched stabilized softmax cross-entropy.

    scores: (B, C); gold: (B,) int indices; valid: (B, C) bool candidate mask;
    weights: (B,) per-example loss weights (0 drops an example from the loss).
    Returns (scalar loss tensor, probability matrix as plain ndarray).
    """
    b, c = scores.shape
    gold = np.asarray(gold, dtype=np.int64)
    if gold.min(initial=0) < 0 or gold.max(initial=0) >= c:
        raise ValueError(f"gold index out of range for {c} candidates")
    if valid is None:
        valid = np.ones((b, c), dtype=bool)
    if weights is None:
        weights = np.ones(b, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    probs = _masked_softmax_forward(scores.data, valid, axis=1)
    total = weights.sum()
    rows = np.arange(b)
    gold_p = np.maximum(probs[rows, gold], 1e-300)
    if total <= 0.0:
        loss_val = 0.0
    else:
        loss_val = float((weights * -np.log(gold_p)).sum() / total)
    out, tape = _result(np.asarray(loss_val), (scores,))
    if tape is not None and total > 0.0:
        def bwd():
            g = out.grad
            if g is None:
                return
            d = probs.copy()
            d[rows, gold] -= 1.0
            d *= (weights / total)[:, None] * float(g)
            d[~valid] = 0.0
            _accum(scores, d)
        tape.record(bwd)
    return out, probs


def bce_with_logits(
    scores: Tensor,
    gold: np.ndarray,
    valid: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Per-candidate sigmoid binary cross-entropy against a one-hot gold.

    Candidate losses are averaged within each example, then weight-averaged
    over the batch. Returns (scalar loss tensor, sigmoid scores ndarray).
    """
    b, c = scores.shape
    gold = np.asarray(gold, dtype=np.int64)
    if valid is None:
        valid = np.ones((b, c), dtype=bool)
    if weights is None:
        weights = np.ones(b, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    s = scores.data
    targets = np.zeros((b, c), dtype=np.float64)
    targets[np.arange(b), gold] = 1.0
    # stable: max(s,0) - s*t + log(1 + exp(-|s|))
    per = np.maximum(s, 0.0) - s * targets + np.log1p(np.exp(-np.abs(s)))
    per = per * valid
    n_valid = np.maximum(valid.sum(axis=1), 1)
    per_example = per.sum(axis=1) / n_valid
    total = weights.sum()
    loss_val = float((weights * per_example).sum() / total) if total > 0 else 0.0
    sig = _sigmoid(s)
    out, tape = _result(np.asarray(loss_val), (scores,))
    if tape is not None and total > 0.0:
        def bwd():
            g = out.grad
            if g is None:
                return
            d = (sig - targets) * valid
            d *= (weights / (total * n_valid))[:, None] * float(g)
            _accum(scores, d)
        tape.record(bwd)
    return out, sig


def softmax_ce(scores, gold: int) -> Tuple[Tensor, np.ndarray]:
    """Single-vector convenience wrapper: scores (N,), gold index."""
    t = as_tensor(scores)
    n = t.shape[0]
    if not 0 <= gold < n:
        raise ValueError(f"gold index {gold} out of range for {n} scores")
    loss, probs = softmax_cross_entropy(reshape(t, (1, n)), np.array([gold]))
    return loss, probs[0]


# ---------------------------------------------------------------------------
# fused recurrent cell


def lstm_step(
    x: Tensor,
    h: Tensor,
    c: Tensor,
    w: Tensor,
    bias: Tensor,
    mask_col: np.ndarray,
) -> Tuple[Tensor, Tensor]:
    """One batched LSTM step with sequence masking, fused into a single node.

    x: (B, d) inputs; h, c: (B, H) previous states; w: (d+H, 4H) with gate
    order [input, forget, cell, output]; bias: (4H,); mask_col: (B, 1) float,
    0 rows keep their previous state. Returns (h', c').
    """
    hd = h.shape[1]
    xh = np.concatenate([x.data, h.data], axis=1)
    z = xh @ w.data + bias.data
    ci = _sigmoid(z[:, 0 * hd:1 * hd])
    cf = _sigmoid(z[:, 1 * hd:2 * hd])
    cg = np.tanh(z[:, 2 * hd:3 * hd])
    co = _sigmoid(z[:, 3 * hd:4 * hd])
    c_new = cf * c.data + ci * cg
    tc = np.tanh(c_new)
    h_new = co * tc
    m = mask_col
    h_out_data = m * h_new + (1.0 - m) * h.data
    c_out_data = m * c_new + (1.0 - m) * c.data

    tape = _active_tape()
    needs = tape is not None and any(p.requires_grad for p in (x, h, c, w, bias))
    h_out = Tensor(h_out_data, requires_grad=needs)
    c_out = Tensor(c_out_data, requires_grad=needs)
    if needs:
        d_in = x.shape[1]
        def bwd():
            gh = h_out.grad
            gc = c_out.grad
            if gh is None and gc is None:
                return
            if gh is None:
                gh = np.zeros_like(h_out_data)
            if gc is None:
                gc = np.zeros_like(c_out_data)
            dh_new = gh * m
            dh_prev = gh * (1.0 - m)
            dc_new = gc * m
            dc_prev = gc * (1.0 - m)
            dco = dh_new * tc
            dc_full = dc_new + dh_new * co * (1.0 - tc * tc)
            dcf = dc_full * c.data
            dc_prev = dc_prev + dc_full * cf
            dci = dc_full * cg
            dcg = dc_full * ci
            dz = np.concatenate(
                [
                    dci * ci * (1.0 - ci),
                    dcf * cf * (1.0 - cf),
                    dcg * (1.0 - cg * cg),
                    dco * co * (1.0 - co),
                ],
                axis=1,
            )
            if w.requires_grad:
                _accum(w, xh.T @ dz)
            if bias.requires_grad:
                _accum(bias, dz.sum(axis=0))
            dxh = dz @ w.data.T
            if x.requires_grad:
                _accum(x, dxh[:, :d_in])
            _accum(h, dxh[:, d_in:] + dh_prev)
            _accum(c, dc_prev)
        tape.record(bwd)
    return h_out, c_out
