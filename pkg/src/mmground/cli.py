"""Command-line surface: simulate / train / eval / ablate / gradcheck / serve.

Flags may be supplemented by a JSON config file (--config); explicit flags
win. Exit codes: 0 success, 1 validation failure, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise CliError(f"{message}\n{self.format_usage()}", EXIT_VALIDATION)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {p}", EXIT_IO)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"bad config file {p}: {exc}", EXIT_VALIDATION)


def _merged(args: argparse.Namespace, config: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def build_parser() -> _Parser:
    parser = _Parser(prog="mmground", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-catalog", help="synthesize a product catalog file")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="generate a grounding dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--catalog", help="catalog JSONL; omit to synthesize one in memory")
    p.add_argument("--catalog-size", type=int, default=2000)
    p.add_argument("--catalog-seed", type=int, default=None)
    p.add_argument("--n-dialogues", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--n-products", type=int, default=None)
    p.add_argument("--mode", choices=["current_screen", "mixed_history", "singleturn"], default=None)
    p.add_argument("--color-fraction", type=float, default=None)
    p.add_argument("--history-window", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--validate", action="store_true", help="re-check emitted references")
    p.add_argument("--config")

    p = sub.add_parser("train", help="train a grounding model")
    p.add_argument("--train", required=True, nargs="+", help="training JSONL file(s)")
    p.add_argument("--dev", nargs="+", default=[])
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log-out", help="training log JSON path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--history-window", type=int, default=None)
    p.add_argument("--loss", choices=["cross_entropy", "binary_ce"], default=None)
    p.add_argument("--no-metadata", action="store_true")
    p.add_argument("--no-visual", action="store_true")
    p.add_argument("--no-query-attention", action="store_true")
    p.add_argument("--no-self-attention", action="store_true")
    p.add_argument("--word-vectors", help="text-format word vector file (frozen + learned projection)")
    p.add_argument("--feature-file", help="precomputed visual features JSONL (file-backed provider)")
    p.add_argument("--config")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--test", required=True, nargs="+")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--report", help="write MetricsReport JSON here")
    p.add_argument("--feature-file", help="precomputed visual features JSONL")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate", help="train and compare model variants")
    p.add_argument("--train", required=True, nargs="+")
    p.add_argument("--dev", required=True, nargs="+")
    p.add_argument("--test", required=True, nargs="+", help="name=path pairs")
    p.add_argument("--suite", nargs="+", default=["full", "-metadata", "-visual"])
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write rows JSON here")
    p.add_argument("--config")

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--tolerance", type=float, default=1e-3)

    p = sub.add_parser("serve", help="run the interactive session service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8130)
    p.add_argument("--clarify-margin", type=float, default=0.1)
    p.add_argument("--static-dir", help="directory with the browser demo build")
    p.add_argument("--state-dir", help="persist per-session snapshots here")

    p = sub.add_parser("demo", help="prepare demo assets: catalog, data, trained model")
    p.add_argument("--dir", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n-dialogues", type=int, default=400)
    p.add_argument("--epochs", type=int, default=12)

    return parser


# ---------------------------------------------------------------------------


def cmd_make_catalog(args) -> int:
    from .catalog import generate_catalog, save_catalog

    catalog = generate_catalog(args.size, seed=args.seed)
    save_catalog(args.out, catalog)
    print(f"wrote {len(catalog)} products to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .catalog import generate_catalog, load_catalog
    from .data import read_examples
    from .simulator import DatasetConfig, check_dataset, simulate_dataset

    config = _load_config_file(args.config)
    seed = int(_merged(args, config, "seed", 0))
    if args.catalog:
        catalog = load_catalog(args.catalog)
    else:
        catalog_seed = _merged(args, config, "catalog_seed", seed + 1)
        catalog = generate_catalog(args.catalog_size, seed=int(catalog_seed))
    cfg = DatasetConfig(
        n_dialogues=int(_merged(args, config, "n_dialogues", 100)),
        max_len=int(_merged(args, config, "max_len", 5)),
        n_products=int(_merged(args, config, "n_products", 3)),
        history_window=int(_merged(args, config, "history_window", 3)),
        seed=seed,
        mode=_merged(args, config, "mode", "current_screen"),
        color_fraction=float(_merged(args, config, "color_fraction", 0.17)),
    )
    stats = simulate_dataset(catalog, cfg, args.out)
    print(json.dumps(stats, indent=2, sort_keys=True))
    if args.validate:
        examples = read_examples(args.out)
        passed, failures = check_dataset(examples)
        print(f"reference re-check: {passed}/{len(examples)} passed")
        if failures:
            for f in failures[:10]:
                print(f"  FAIL {f}")
            raise CliError(f"{len(failures)} examples failed the uniqueness re-check")
    return EXIT_OK


def cmd_train(args) -> int:
    from .data import read_many
    from .model import ModelConfig
    from .model.io import save_model
    from .training import TrainConfig, train_pipeline

    config = _load_config_file(args.config)
    model_overrides = dict(config.get("model", {}))
    if args.history_window is not None:
        model_overrides["history_window"] = args.history_window
    if args.loss is not None:
        model_overrides["loss"] = args.loss
    if args.no_metadata:
        model_overrides["use_metadata"] = False
    if args.no_visual:
        model_overrides["use_visual"] = False
    if args.no_query_attention:
        model_overrides["use_query_attention"] = False
    if args.no_self_attention:
        model_overrides["use_self_attention"] = False
    model_cfg = ModelConfig.from_dict(model_overrides)
    train_cfg = TrainConfig(
        batch_size=int(_merged(args, config, "batch_size", 128)),
        lr=float(_merged(args, config, "lr", 0.001)),
        epochs=int(_merged(args, config, "epochs", 10)),
        seed=int(_merged(args, config, "seed", 0)),
        patience=int(_merged(args, config, "patience", 5)),
    )
    train_examples = read_many(args.train)
    dev_examples = read_many(args.dev) if args.dev else []
    provider = None
    if args.feature_file:
        from .catalog import FileFeatureProvider

        provider = FileFeatureProvider(args.feature_file, dim=model_cfg.visual_dim)
    print(f"training on {len(train_examples)} examples (dev {len(dev_examples)})")
    model, log = train_pipeline(
        train_examples, dev_examples, model_cfg, train_cfg,
        provider=provider,
        word_vectors_path=args.word_vectors,
        log_fn=lambda e: print(
            f"epoch {e['epoch']}: loss {e['train_loss']:.4f} "
            f"train {e['train_accuracy']:.4f} dev {e['dev_accuracy']:.4f}"
        ),
    )
    save_model(args.out, model, extra={"training_log": log})
    print(f"saved checkpoint to {args.out} (best dev {log['best_dev_accuracy']:.4f})")
    if args.log_out:
        Path(args.log_out).write_text(json.dumps(log, indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .data import read_many
    from .model.io import load_model
    from .training import evaluate

    provider = None
    if args.feature_file:
        from .catalog import FileFeatureProvider

        model_probe = load_model(args.ckpt)
        provider = FileFeatureProvider(args.feature_file, dim=model_probe.cfg.visual_dim)
    model = load_model(args.ckpt, provider=provider)
    examples = read_many(args.test)
    report = evaluate(model, examples, seed=args.seed)
    print(report.format_table())
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .ablation import ablation_to_json, format_ablation_table, run_ablation
    from .data import read_many
    from .model import ModelConfig
    from .training import TrainConfig

    config = _load_config_file(args.config)
    test_sets = {}
    for spec_pair in args.test:
        if "=" not in spec_pair:
            raise CliError(f"--test expects name=path, got {spec_pair!r}")
        name, path = spec_pair.split("=", 1)
        test_sets[name] = read_many([path])
    model_cfg = ModelConfig.from_dict(dict(config.get("model", {})))
    train_cfg = TrainConfig(
        batch_size=int(_merged(args, config, "batch_size", 128)),
        lr=float(_merged(args, config, "lr", 0.001)),
        epochs=int(_merged(args, config, "epochs", 8)),
        seed=int(_merged(args, config, "seed", 0)),
        patience=int(_merged(args, config, "patience", 5)),
    )
    rows = run_ablation(
        model_cfg,
        train_cfg,
        args.suite,
        read_many(args.train),
        read_many(args.dev),
        test_sets,
        seeds=args.seeds,
        log_fn=lambda row: print(f"done: {row.variant} seed={row.seed} dev={row.dev_accuracy:.4f}"),
    )
    print(format_ablation_table(rows))
    if args.out:
        Path(args.out).write_text(ablation_to_json(rows), encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck_harness import full_model_gradcheck

    worst, per_tensor = full_model_gradcheck(seed=args.seed, samples_per_tensor=args.samples)
    for name in sorted(per_tensor):
        print(f"  {name:<24} {per_tensor[name]:.3e}")
    print(f"max relative error: {worst:.3e} (tolerance {args.tolerance:g})")
    if worst > args.tolerance:
        print("GRADCHECK FAILED")
        return EXIT_VALIDATION
    print("GRADCHECK OK")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    serve(
        args.ckpt,
        args.catalog,
        host=args.host,
        port=args.port,
        clarify_margin=args.clarify_margin,
        static_dir=args.static_dir,
        state_dir=args.state_dir,
    )
    return EXIT_OK


def cmd_demo(args) -> int:
    from .demo import prepare_demo

    paths = prepare_demo(args.dir, seed=args.seed, n_dialogues=args.n_dialogues, epochs=args.epochs)
    print(json.dumps(paths, indent=2))
    return EXIT_OK


_COMMANDS = {
    "make-catalog": cmd_make_catalog,
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
    "serve": cmd_serve,
    "demo": cmd_demo,
}


def main(argv: Optional[List[str]] = None) -> int:
    from .catalog import CatalogError
    from .data import DatasetError
    from .nn.checkpoint import CheckpointError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CatalogError, DatasetError, CheckpointError) as exc:
        code = EXIT_IO if "not found" in str(exc) else EXIT_VALIDATION
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
