"""Encoder layer behavior: sinusoids, BiLSTM, attention, bilinear scorer, Adam."""

import math

import numpy as np
import pytest

from mmground.nn import ParameterStore, Tape, Tensor, adam_step
from mmground.nn import layers as L
from mmground.nn import tensor as T


def lstm_cell_reference(x, h, c, w, b):
    """Independent single-step gate math (plain numpy, no tape)."""
    hd = h.shape[-1]
    z = np.concatenate([x, h]) @ w + b
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    i, f, g, o = z[:hd], z[hd:2 * hd], z[2 * hd:3 * hd], z[3 * hd:]
    c_new = sig(f) * c + sig(i) * np.tanh(g)
    return sig(o) * np.tanh(c_new), c_new


# -- sinusoidal embeddings ----------------------------------------------------

def test_sinusoid_at_zero():
    assert np.allclose(L.sinusoidal_embed(0.0, 4), [0.0, 1.0, 0.0, 1.0])


def test_sinusoid_dim2_value3():
    out = L.sinusoidal_embed(3.0, 2)
    assert np.allclose(out, [0.1411200080598672, -0.9899924966004454])


def test_sinusoid_purity():
    assert np.array_equal(L.sinusoidal_embed(17.5, 10), L.sinusoidal_embed(17.5, 10))


def test_sinusoid_rejects_odd_dim():
    with pytest.raises(ValueError):
        L.sinusoidal_embed(1.0, 5)


def test_sinusoid_rows_matches_scalar():
    values = np.array([0.0, 1.0, 13.0, 50.0])
    rows = L.sinusoid_rows(values, 8)
    for i, v in enumerate(values):
        assert np.allclose(rows[i], L.sinusoidal_embed(v, 8))


# -- bidirectional LSTM --------------------------------------------------------

def test_bilstm_zero_params_zero_final():
    store = ParameterStore(seed=0)
    h = 4
    tokens = np.random.default_rng(0).normal(size=(6, 3))
    for d in ("fw", "bw"):
        store.get_or_create(f"enc.{d}.W", (3 + h, 4 * h), std=0.0)
        store.get_or_create(f"enc.{d}.b", (4 * h,), std=0.0)
    _, final = L.bilstm_encode(store, "enc", tokens, h)
    assert np.allclose(final.data, 0.0)


def test_bilstm_t1_final_halves_equal_with_shared_params():
    store = ParameterStore(seed=3)
    h = 5
    tokens = np.random.default_rng(1).normal(size=(1, 4))
    fw_w = store.get_or_create("enc.fw.W", (4 + h, 4 * h), std=0.3)
    fw_b = store.get_or_create("enc.fw.b", (4 * h,), std=0.2)
    store.put("enc.bw.W", fw_w.data.copy())
    store.put("enc.bw.b", fw_b.data.copy())
    _, final = L.bilstm_encode(store, "enc", tokens, h)
    assert np.allclose(final.data[:h], final.data[h:])
    # and it matches the independent cell math
    ref_h, _ = lstm_cell_reference(tokens[0], np.zeros(h), np.zeros(h), fw_w.data, fw_b.data)
    assert np.allclose(final.data[:h], ref_h)


def test_bilstm_reversal_swaps_final_halves():
    store = ParameterStore(seed=4)
    h = 4
    rng = np.random.default_rng(2)
    tokens = rng.normal(size=(5, 3))
    fw_w = store.get_or_create("a.fw.W", (3 + h, 4 * h), std=0.3)
    fw_b = store.get_or_create("a.fw.b", (4 * h,), std=0.1)
    bw_w = store.get_or_create("a.bw.W", (3 + h, 4 * h), std=0.3)
    bw_b = store.get_or_create("a.bw.b", (4 * h,), std=0.1)
    _, final = L.bilstm_encode(store, "a", tokens, h)

    swapped = ParameterStore(seed=5)
    swapped.put("b.fw.W", bw_w.data)
    swapped.put("b.fw.b", bw_b.data)
    swapped.put("b.bw.W", fw_w.data)
    swapped.put("b.bw.b", fw_b.data)
    _, final_rev = L.bilstm_encode(swapped, "b", tokens[::-1].copy(), h)
    assert np.allclose(final.data[:h], final_rev.data[h:], atol=1e-12)
    assert np.allclose(final.data[h:], final_rev.data[:h], atol=1e-12)


def test_bilstm_padding_invariance():
    """Batch padding must not change a row's states or final."""
    store = ParameterStore(seed=6)
    h = 4
    rng = np.random.default_rng(3)
    seq = rng.normal(size=(3, 2))
    single_states, single_final = L.bilstm(
        store, "enc", Tensor(seq[None, :, :]), np.array([3]), h
    )
    padded = np.zeros((2, 6, 2))
    padded[0, :3] = seq
    padded[1] = rng.normal(size=(6, 2))
    batch_states, batch_final = L.bilstm(
        store, "enc", Tensor(padded), np.array([3, 6]), h
    )
    assert np.allclose(batch_final.data[0], single_final.data[0], atol=1e-12)
    assert np.allclose(batch_states.data[0, :3], single_states.data[0], atol=1e-12)


def test_bilstm_rejects_empty():
    store = ParameterStore(seed=0)
    with pytest.raises(ValueError):
        L.bilstm_encode(store, "enc", np.zeros((0, 3)), 4)


# -- attention -------------------------------------------------------------------

def test_attend_single_token_returns_value():
    store = ParameterStore(seed=7)
    out = L.attend_single(
        store, "att", np.array([1.0, -2.0]), np.array([[0.5, 0.5, 1.0]]), np.array([[3.0, 4.0]])
    )
    assert np.allclose(out.data, [3.0, 4.0])


def test_attend_identical_keys_mean_of_values():
    store = ParameterStore(seed=8)
    keys = np.tile(np.array([[0.3, -0.7]]), (4, 1))
    values = np.arange(8.0).reshape(4, 2)
    out = L.attend_single(store, "att", np.array([0.2, 0.9]), keys, values)
    assert np.allclose(out.data, values.mean(axis=0))


def test_attend_sharpens_with_scale():
    store = ParameterStore(seed=9)
    dk = 3
    store.put("att.P", np.eye(dk))
    q = np.array([100.0, 0.0, 0.0])
    keys = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    values = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    out = L.attend_single(store, "att", q, keys, values)
    assert np.allclose(out.data, values[0], atol=1e-10)


def test_attend_invariant_to_joint_kv_permutation():
    store = ParameterStore(seed=10)
    rng = np.random.default_rng(4)
    q = rng.normal(size=4)
    keys = rng.normal(size=(5, 3))
    values = rng.normal(size=(5, 2))
    out = L.attend_single(store, "att", q, keys, values).data
    perm = rng.permutation(5)
    out_p = L.attend_single(store, "att", q, keys[perm], values[perm]).data
    assert np.allclose(out, out_p, atol=1e-12)


# -- self-attention -----------------------------------------------------------------

def test_self_attend_singleton():
    store = ParameterStore(seed=11)
    e = np.random.default_rng(5).normal(size=(1, 6))
    out = L.self_attend_single(store, "sa", e, attn_dim=4).data
    wv, wo = store["sa.Wv"].data, store["sa.Wo"].data
    assert np.allclose(out, e + (e @ wv) @ wo, atol=1e-12)


def test_self_attend_zero_value_proj_is_identity():
    store = ParameterStore(seed=12)
    e = np.random.default_rng(6).normal(size=(3, 5))
    store.put("sa.Wq", np.random.default_rng(7).normal(size=(5, 4)))
    store.put("sa.Wk", np.random.default_rng(8).normal(size=(5, 4)))
    store.put("sa.Wv", np.zeros((5, 4)))
    store.put("sa.Wo", np.zeros((4, 5)))
    out = L.self_attend_single(store, "sa", e, attn_dim=4).data
    assert np.allclose(out, e)


def test_self_attend_permutation_equivariant():
    store = ParameterStore(seed=13)
    rng = np.random.default_rng(9)
    e = rng.normal(size=(5, 6))
    out = L.self_attend_single(store, "sa", e, attn_dim=4).data
    perm = rng.permutation(5)
    out_p = L.self_attend_single(store, "sa", e[perm], attn_dim=4).data
    assert np.allclose(out[perm], out_p, atol=1e-12)


# -- bilinear scorer ------------------------------------------------------------------

def test_bilinear_identity_gives_norm():
    q = np.array([1.0, 2.0, -1.5])
    scores = L.bilinear_scores(q, q[None, :], np.eye(3)).data
    assert np.allclose(scores, [float(q @ q)])


def test_bilinear_zero_w():
    scores = L.bilinear_scores(np.ones(3), np.random.default_rng(0).normal(size=(4, 5)), np.zeros((3, 5)))
    assert np.allclose(scores.data, 0.0)


def test_bilinear_hand_case():
    q = np.array([1.0, 0.0])
    w = np.array([[0.0, 1.0], [0.0, 0.0]])
    e = np.array([[3.0, 4.0]])
    assert np.allclose(L.bilinear_scores(q, e, w).data, [4.0])


def test_bilinear_shape_mismatch():
    with pytest.raises(ValueError):
        L.bilinear_scores(np.ones(3), np.ones((2, 4)), np.ones((3, 5)))


def test_bilinear_batch_matches_single():
    rng = np.random.default_rng(10)
    q = rng.normal(size=(3, 4))
    e = rng.normal(size=(3, 5, 6))
    w = rng.normal(size=(4, 6))
    batch = L.bilinear_scores_batch(Tensor(q), Tensor(e), Tensor(w)).data
    for i in range(3):
        single = L.bilinear_scores(q[i], e[i], w).data
        assert np.allclose(batch[i], single, atol=1e-12)


# -- Adam ---------------------------------------------------------------------------

def test_adam_zero_grad_no_change():
    store = ParameterStore(seed=0)
    p = store.get_or_create("w", (3,), std=1.0)
    before = p.data.copy()
    p.grad = np.zeros(3)
    adam_step(store, lr=0.1)
    assert np.array_equal(p.data, before)


def test_adam_first_step_closed_form():
    store = ParameterStore(seed=0)
    p = store.get_or_create("w", (1,), std=0.0)
    p.grad = np.array([1.0])
    adam_step(store, lr=0.001)
    assert math.isclose(p.data[0], -0.00099999999, rel_tol=1e-6)
    assert store.step_count == 1
    assert p.grad is None  # gradients zeroed after the step


def test_adam_moments_carry_momentum():
    # constant gradients give exactly equal steps (m-hat = v-hat = 1 both
    # times); accumulated moments show up as a nonzero step after the
    # gradient vanishes
    store = ParameterStore(seed=0)
    p = store.get_or_create("w", (1,), std=0.0)
    p.grad = np.array([1.0])
    adam_step(store, lr=0.001)
    d1 = p.data[0]
    p.grad = np.array([0.0])
    adam_step(store, lr=0.001)
    d2 = p.data[0] - d1
    assert d2 != 0.0
    assert not math.isclose(d1, d2, rel_tol=1e-6)
    # expected second step from the closed form: m-hat=0.0474, v-hat=0.4997
    assert math.isclose(d2, -0.001 * (0.09 / 0.19) / (math.sqrt(0.000999 / 0.001999) + 1e-8),
                        rel_tol=1e-9)


def test_adam_missing_grad_errors():
    store = ParameterStore(seed=0)
    store.get_or_create("w", (2,), std=0.1)
    with pytest.raises(ValueError, match="missing gradients"):
        adam_step(store, lr=0.01)
