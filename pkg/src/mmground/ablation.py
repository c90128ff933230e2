"""Ablation harness: trains model variants on shared data and tabulates
overall + color-slice accuracy per test set."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .data import GroundingExample
from .model import LOSS_BINARY_CE, LOSS_CROSS_ENTROPY, ModelConfig
from .training import MetricsReport, TrainConfig, evaluate, train_pipeline

# removal variants relative to the base config
VARIANTS = {
    "full": {},
    "-metadata": {"use_metadata": False},
    "-visual": {"use_visual": False},
    "-query_attention": {"use_query_attention": False},
    "-self_attention": {"use_self_attention": False},
    "bce_loss": {"loss": LOSS_BINARY_CE},
    "-history": {"history_window": 0},
}

# additive ladder mirroring the component study: every rung drops visual
# features, starting from plain concatenation with binary cross-entropy
LADDER = (
    ("vanilla", {
        "use_visual": False, "use_query_attention": False,
        "use_self_attention": False, "loss": LOSS_BINARY_CE,
    }),
    ("+query_attention", {
        "use_visual": False, "use_query_attention": True,
        "use_self_attention": False, "loss": LOSS_BINARY_CE,
    }),
    ("+self_attention", {
        "use_visual": False, "use_query_attention": True,
        "use_self_attention": True, "loss": LOSS_BINARY_CE,
    }),
    ("+cross_entropy", {
        "use_visual": False, "use_query_attention": True,
        "use_self_attention": True, "loss": LOSS_CROSS_ENTROPY,
    }),
)


class AblationError(Exception):
    pass


def variant_config(base: ModelConfig, name: str) -> ModelConfig:
    if name in VARIANTS:
        overrides = VARIANTS[name]
    else:
        ladder = dict(LADDER)
        if name not in ladder:
            raise AblationError(f"unknown ablation variant {name!r}")
        overrides = ladder[name]
    cfg = replace(base, **overrides)
    cfg.validate()
    return cfg


@dataclass
class AblationRow:
    variant: str
    seed: int
    dev_accuracy: float
    reports: Dict[str, MetricsReport]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "dev_accuracy": self.dev_accuracy,
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
        }


def run_ablation(
    base_model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    suite: Sequence[str],
    train_examples: Sequence[GroundingExample],
    dev_examples: Sequence[GroundingExample],
    test_sets: Dict[str, Sequence[GroundingExample]],
    seeds: Optional[Sequence[int]] = None,
    log_fn=None,
) -> List[AblationRow]:
    """Train each suite variant on the shared data and evaluate on every test set."""
    seeds = list(seeds) if seeds else [train_cfg.seed]
    rows: List[AblationRow] = []
    for name in suite:
        cfg = variant_config(base_model_cfg, name)
        for seed in seeds:
            tcfg = replace(train_cfg, seed=seed)
            model, log = train_pipeline(train_examples, dev_examples, cfg, tcfg)
            reports = {key: evaluate(model, exs, seed=seed) for key, exs in test_sets.items()}
            row = AblationRow(
                variant=name,
                seed=seed,
                dev_accuracy=log["best_dev_accuracy"],
                reports=reports,
            )
            rows.append(row)
            if log_fn:
                log_fn(row)
    return rows


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    test_keys: List[str] = []
    for row in rows:
        for key in row.reports:
            if key not in test_keys:
                test_keys.append(key)
    header = f"{'variant':<18}{'seed':<6}{'dev':<8}"
    for key in test_keys:
        header += f"{key + ' overall':<22}{key + ' color':<20}"
    lines = [header, "-" * len(header)]
    for row in rows:
        line = f"{row.variant:<18}{row.seed:<6}{row.dev_accuracy:<8.4f}"
        for key in test_keys:
            rep = row.reports.get(key)
            if rep is None:
                line += f"{'-':<22}{'-':<20}"
                continue
            color = rep.slice_accuracy("color")
            color_s = f"{color:.4f}" if color is not None else "-"
            line += f"{rep.overall:<22.4f}{color_s:<20}"
        lines.append(line)
    return "\n".join(lines)


def ablation_to_json(rows: Sequence[AblationRow]) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=2, sort_keys=True)
