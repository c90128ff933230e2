"""CLI subcommands, config merging, and exit codes."""

import json

import pytest

from mmground.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from mmground.data import read_examples


def test_unknown_flag_exits_1(capsys):
    assert main(["simulate", "--frobnicate"]) == EXIT_VALIDATION
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_exits_1():
    assert main(["transmogrify"]) == EXIT_VALIDATION


def test_make_catalog_and_simulate(tmp_path, capsys):
    catalog_path = tmp_path / "cat.jsonl"
    assert main(["make-catalog", "--out", str(catalog_path), "--size", "200", "--seed", "3"]) == EXIT_OK
    out = tmp_path / "data.jsonl"
    code = main([
        "simulate", "--out", str(out), "--catalog", str(catalog_path),
        "--n-dialogues", "10", "--seed", "7", "--validate",
    ])
    assert code == EXIT_OK
    examples = read_examples(out)
    assert examples
    assert "reference re-check" in capsys.readouterr().out


def test_simulate_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main([
            "simulate", "--out", str(out), "--n-dialogues", "8", "--seed", "3",
            "--catalog-size", "300",
        ]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_simulate_missing_catalog_exits_2(tmp_path):
    code = main([
        "simulate", "--out", str(tmp_path / "x.jsonl"),
        "--catalog", str(tmp_path / "missing.jsonl"), "--n-dialogues", "2",
    ])
    assert code == EXIT_VALIDATION or code == EXIT_IO


def test_config_file_merging(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"n_dialogues": 5, "seed": 9}))
    out = tmp_path / "d.jsonl"
    assert main([
        "simulate", "--out", str(out), "--config", str(cfg_path), "--catalog-size", "300",
    ]) == EXIT_OK
    assert len(read_examples(out)) > 0


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--seed", "1", "--samples", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "max relative error" in out
    assert "GRADCHECK OK" in out


@pytest.mark.slow
def test_train_eval_cycle(tmp_path, capsys):
    catalog_path = tmp_path / "cat.jsonl"
    main(["make-catalog", "--out", str(catalog_path), "--size", "500", "--seed", "3"])
    train_path = tmp_path / "train.jsonl"
    test_path = tmp_path / "test.jsonl"
    main(["simulate", "--out", str(train_path), "--catalog", str(catalog_path),
          "--n-dialogues", "60", "--seed", "1"])
    main(["simulate", "--out", str(test_path), "--catalog", str(catalog_path),
          "--n-dialogues", "10", "--seed", "2"])
    ckpt = tmp_path / "m.ckpt"
    log_path = tmp_path / "log.json"
    code = main([
        "train", "--train", str(train_path), "--dev", str(test_path),
        "--out", str(ckpt), "--epochs", "2", "--batch-size", "64",
        "--lr", "0.002", "--seed", "4", "--log-out", str(log_path),
    ])
    assert code == EXIT_OK
    assert ckpt.exists() and log_path.exists()
    report_path = tmp_path / "report.json"
    code = main([
        "eval", "--test", str(test_path), "--ckpt", str(ckpt),
        "--report", str(report_path),
    ])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    assert set(report) >= {"overall", "slices", "config_digest", "seed"}
    assert 0.0 <= report["overall"] <= 1.0
    assert all({"accuracy", "count"} <= set(s) for s in report["slices"].values())


def test_eval_missing_checkpoint_exits_nonzero(tmp_path):
    data = tmp_path / "d.jsonl"
    main(["simulate", "--out", str(data), "--n-dialogues", "2", "--catalog-size", "200"])
    code = main(["eval", "--test", str(data), "--ckpt", str(tmp_path / "no.ckpt")])
    assert code in (EXIT_VALIDATION, EXIT_IO)
