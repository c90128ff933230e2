"""Acceptance suite: one criterion per test, one PASS/FAIL line each.

The heavyweight training criteria share module-scoped fixtures; everything is
seeded, so reruns are reproducible. Expect roughly 45-60 minutes end to end
on a laptop CPU.
"""

import time
from collections import Counter

import numpy as np
import pytest

from mmground.ablation import run_ablation
from mmground.catalog import generate_catalog
from mmground.data import read_examples, write_examples
from mmground.gradcheck_harness import full_model_gradcheck
from mmground.model import ModelConfig
from mmground.model.io import load_model, save_model
from mmground.simulator import DatasetConfig, check_dataset, generate_dialogue, replay_dialogue, simulate_dataset
from mmground.training import TrainConfig, build_model, evaluate, train, train_pipeline
from tests.conftest import make_examples


def criterion(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


ACCEPT_TRAIN = TrainConfig(batch_size=64, lr=0.002, epochs=8, seed=1, patience=8)


# -- 1. gradient integrity ------------------------------------------------------

def test_gradient_integrity():
    start = time.time()
    worst, per_tensor = full_model_gradcheck(seed=1, samples_per_tensor=8)
    elapsed = time.time() - start
    detail = f"max rel err {worst:.3e} over {len(per_tensor)} tensors in {elapsed:.1f}s"
    criterion("gradient integrity (<= 1e-3, < 60s)", worst <= 1e-3 and elapsed < 60, detail)


# -- 2. overfit sanity -----------------------------------------------------------

@pytest.mark.slow
def test_overfit_sanity(train_catalog):
    examples = make_examples(train_catalog, 16, seed=77)[:100]
    assert len(examples) == 100
    model = build_model(examples, ModelConfig(), seed=3)
    encoded = model.encode_dataset(examples)
    start = time.time()
    cfg = TrainConfig(batch_size=16, lr=0.002, epochs=200, seed=3, patience=200)
    best = 0.0
    for epoch_block in range(20):  # 10-epoch blocks, stop early once passed
        block = TrainConfig(batch_size=16, lr=0.002, epochs=10, seed=3 + epoch_block,
                            patience=10)
        train(model, encoded, [], block)
        best = evaluate(model, examples).overall
        if best >= 0.99:
            break
    elapsed = time.time() - start
    epochs_used = (epoch_block + 1) * 10
    detail = f"train accuracy {best:.3f} after <= {epochs_used} epochs in {elapsed:.0f}s"
    criterion("overfit sanity (>= 99% within 200 epochs, < 5 min)",
              best >= 0.99 and elapsed < 300, detail)


# -- 3. random baseline -----------------------------------------------------------

def test_random_baseline_three_candidates(eval_catalog):
    examples = make_examples(
        eval_catalog, 1200, seed=55, mode="singleturn", max_len=1, color_fraction=0.5
    )
    assert all(len(ex.candidates) == 3 for ex in examples)
    model = build_model(examples[:200], ModelConfig(), seed=9)  # untrained
    report = evaluate(model, examples)
    detail = f"untrained accuracy {report.overall:.4f} on {report.n_examples} 3-candidate examples"
    criterion("random baseline (33% +/- 3)", 0.30 <= report.overall <= 0.36, detail)


# -- 4. desk-scale headline ---------------------------------------------------------

@pytest.fixture(scope="module")
def headline_assets(tmp_path_factory):
    root = tmp_path_factory.mktemp("headline")
    train_cat = generate_catalog(8000, seed=501)
    test_cat = generate_catalog(2000, seed=502)  # disjoint catalog split
    train_ex = make_examples(train_cat, 3100, seed=61)[:20000]
    dev_ex = make_examples(train_cat, 170, seed=62)
    test_ex = make_examples(test_cat, 320, seed=63)[:2000]
    assert len(train_ex) == 20000 and len(test_ex) == 2000
    start = time.time()
    model, log = train_pipeline(train_ex, dev_ex, ModelConfig(), ACCEPT_TRAIN)
    train_minutes = (time.time() - start) / 60.0
    ckpt = root / "headline.ckpt"
    save_model(ckpt, model)
    report = evaluate(model, test_ex)
    return {
        "model": model,
        "report": report,
        "train_minutes": train_minutes,
        "ckpt": ckpt,
        "test_examples": test_ex,
        "log": log,
    }


@pytest.mark.slow
def test_headline_accuracy(headline_assets):
    report = headline_assets["report"]
    minutes = headline_assets["train_minutes"]
    detail = (
        f"overall {report.overall:.4f} on {report.n_examples} held-out examples, "
        f"training {minutes:.1f} min"
    )
    if minutes >= 30:
        print(f"\n[WARN] headline training exceeded the 30-minute target ({minutes:.1f} min)")
    criterion("desk-scale headline (>= 80%)", report.overall >= 0.80, detail)


# -- 5. history effect ----------------------------------------------------------------

@pytest.mark.slow
def test_history_effect(tmp_path):
    train_cat = generate_catalog(6000, seed=511)
    test_cat = generate_catalog(2000, seed=512)
    train_ex = make_examples(train_cat, 1100, seed=71, mode="mixed_history")
    dev_ex = make_examples(train_cat, 120, seed=72, mode="mixed_history")
    test_ex = make_examples(test_cat, 260, seed=73, mode="mixed_history")
    n_hist = sum(1 for ex in test_ex if ex.history_required)
    assert n_hist >= 50, f"only {n_hist} historical references in the test set"

    cfg = TrainConfig(batch_size=64, lr=0.002, epochs=6, seed=1, patience=6)
    windowed, _ = train_pipeline(train_ex, dev_ex, ModelConfig(history_window=3), cfg)
    flat, _ = train_pipeline(train_ex, dev_ex, ModelConfig(history_window=0), cfg)
    rep_windowed = evaluate(windowed, test_ex)
    rep_flat = evaluate(flat, test_ex)
    hist_windowed = rep_windowed.slice_accuracy("historical") or 0.0
    hist_flat = rep_flat.slice_accuracy("historical") or 0.0
    gap = (hist_windowed - hist_flat) * 100
    detail = (
        f"historical slice: window-3 {hist_windowed:.3f} vs window-0 {hist_flat:.3f} "
        f"(gap {gap:.1f} points; overall {rep_windowed.overall:.3f} vs {rep_flat.overall:.3f})"
    )
    criterion("history effect (>= 10-point historical-slice gap)", gap >= 10.0, detail)


# -- 6. ablation directions -------------------------------------------------------------

@pytest.fixture(scope="module")
def ablation_data():
    # variable page sizes (2-5 cards) make end-anchored and comparative
    # references genuinely relational
    sizes = dict(min_products=2, max_products=5)
    train_cat = generate_catalog(6000, seed=521)
    test_cat = generate_catalog(2000, seed=522)
    return {
        "train": make_examples(train_cat, 930, seed=81, **sizes),
        "dev": make_examples(train_cat, 150, seed=82, **sizes),
        "test": make_examples(test_cat, 190, seed=83, **sizes),
    }


def _slice_mean(report, names):
    total, hits = 0, 0.0
    for name in names:
        s = report.slices.get(name)
        if s:
            total += s["count"]
            hits += s["accuracy"] * s["count"]
    return hits / total if total else 0.0


@pytest.mark.slow
def test_ablation_feature_directions(ablation_data):
    cfg = TrainConfig(batch_size=64, lr=0.002, epochs=6, seed=2, patience=6)
    rows = run_ablation(
        ModelConfig(), cfg, ["full", "-visual", "-metadata"],
        ablation_data["train"], ablation_data["dev"], {"test": ablation_data["test"]},
    )
    by_variant = {r.variant: r.reports["test"] for r in rows}
    full = by_variant["full"]
    no_visual = by_variant["-visual"]
    no_meta = by_variant["-metadata"]

    color_drop = (full.slice_accuracy("color") - no_visual.slice_accuracy("color")) * 100
    detail_a = (
        f"color slice {full.slice_accuracy('color'):.3f} -> "
        f"{no_visual.slice_accuracy('color'):.3f} without visual features "
        f"(drop {color_drop:.1f} points)"
    )
    criterion("ablation (a): -visual drops color slice >= 15 points", color_drop >= 15.0, detail_a)

    metadata_slices = ("name", "price", "rating", "prime")
    meta_full = _slice_mean(full, metadata_slices)
    meta_dropped = _slice_mean(no_meta, metadata_slices)
    meta_drop = (meta_full - meta_dropped) * 100
    color_move = abs(full.slice_accuracy("color") - no_meta.slice_accuracy("color")) * 100
    detail_b = (
        f"metadata slices {meta_full:.3f} -> {meta_dropped:.3f} "
        f"(drop {meta_drop:.1f} points); color moved {color_move:.1f} points"
    )
    criterion(
        "ablation (b): -metadata drops metadata slices >= 15, color moves < 5",
        meta_drop >= 15.0 and color_move < 5.0,
        detail_b,
    )


@pytest.fixture(scope="module")
def ladder_rows(ablation_data):
    cfg = TrainConfig(batch_size=64, lr=0.002, epochs=10, seed=0, patience=10)
    return run_ablation(
        ModelConfig(), cfg,
        ["vanilla", "+query_attention", "+self_attention", "+cross_entropy"],
        ablation_data["train"], ablation_data["dev"], {"test": ablation_data["test"]},
        seeds=[0, 1, 2],
    )


def _ladder_mean_dev(rows, variant):
    accs = [r.dev_accuracy for r in rows if r.variant == variant]
    return float(np.mean(accs))


@pytest.mark.slow
def test_ablation_attention_gains(ladder_rows):
    vanilla = _ladder_mean_dev(ladder_rows, "vanilla")
    with_qattn = _ladder_mean_dev(ladder_rows, "+query_attention")
    with_self = _ladder_mean_dev(ladder_rows, "+self_attention")
    detail = (
        f"mean dev over 3 seeds: vanilla {vanilla:.4f} -> "
        f"+query attention {with_qattn:.4f} -> +self-attention {with_self:.4f}"
    )
    criterion(
        "ablation (c): query attention and self-attention each improve dev accuracy",
        with_qattn > vanilla and with_self > with_qattn,
        detail,
    )


@pytest.mark.slow
def test_ablation_loss_direction(ladder_rows):
    bce = _ladder_mean_dev(ladder_rows, "+self_attention")       # ladder runs BCE
    ce = _ladder_mean_dev(ladder_rows, "+cross_entropy")
    detail = f"mean dev over 3 seeds: binary-CE {bce:.4f} vs cross-entropy {ce:.4f}"
    criterion("ablation (d): cross-entropy >= binary-CE", ce >= bce, detail)


# -- 7. simulator soundness ----------------------------------------------------------

@pytest.mark.slow
def test_simulator_soundness(tmp_path):
    catalog = generate_catalog(6000, seed=531)
    cfg = DatasetConfig(n_dialogues=1500, max_len=5, seed=91, mode="mixed_history")
    out1 = tmp_path / "sound1.jsonl"
    out2 = tmp_path / "sound2.jsonl"
    stats = simulate_dataset(catalog, cfg, out1)
    simulate_dataset(catalog, cfg, out2)
    examples = read_examples(out1)
    assert stats["n_examples"] >= 10000, "need at least 10K examples for this criterion"

    passed, failures = check_dataset(examples)
    byte_identical = out1.read_bytes() == out2.read_bytes()

    replay_ok = True
    for i in range(0, 40):
        dialogue, _ = generate_dialogue(catalog, cfg, i)
        screens = replay_dialogue(catalog, cfg, dialogue)
        for t, turn in enumerate(dialogue.turns):
            a = [e.to_dict() for e in turn.screen_after.entities]
            b = [e.to_dict() for e in screens[t + 1].entities]
            if a != b:
                replay_ok = False

    detail = (
        f"{passed}/{len(examples)} pass the independent re-check "
        f"({len(failures)} failures); replay {'ok' if replay_ok else 'BROKEN'}; "
        f"byte-identical={byte_identical}"
    )
    criterion(
        "simulator soundness (100% re-check, replay, determinism)",
        not failures and replay_ok and byte_identical,
        detail,
    )


# -- 8. checkpoint round-trip ------------------------------------------------------------

@pytest.mark.slow
def test_checkpoint_roundtrip(headline_assets, tmp_path):
    model = headline_assets["model"]
    loaded = load_model(headline_assets["ckpt"])
    worst = 0.0
    for ex in headline_assets["test_examples"][:300]:
        a = model.ground(ex)
        b = loaded.ground(ex)
        scale = max(max(abs(s) for s in a.scores), 1e-9)
        for s1, s2 in zip(a.scores, b.scores):
            worst = max(worst, abs(s1 - s2) / max(abs(s1), abs(s2), scale))
    detail = f"max relative score deviation {worst:.2e} over 300 examples"
    criterion("checkpoint round-trip (<= 1e-5 relative)", worst <= 1e-5, detail)
