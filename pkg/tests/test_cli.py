import json

import pytest

from cloudsentry.cli import main
from cloudsentry.ingest import scenario_to_dict

from conftest import make_small_scenario


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small scenario file plus a fast config for CLI smoke runs."""
    root = tmp_path_factory.mktemp("cli")
    scenario_path = root / "scenario.json"
    scenario_path.write_text(json.dumps(scenario_to_dict(make_small_scenario(seed=5))))
    config = {
        "train_extractor": False,
        "context": {"k": 8, "fallback_dim": 8},
        "extractor": {
            "branch_channels": 2, "cnn_dim": 4, "lstm_hidden": 4,
            "key_dim": 4, "value_dim": 8,
        },
        "svm": {"epochs": 25, "c": 5.0},
        "warning": {"threshold": 0.6},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return root, scenario_path, config_path


def test_generate_train_detect_eval_flow(workspace, capsys):
    root, scenario_path, config_path = workspace
    data = root / "stream.jsonl"
    ckpt = root / "model.ckpt"
    alerts = root / "alerts.jsonl"
    report = root / "report.json"

    assert main(["generate", "--scenario", str(scenario_path), "--out", str(data)]) == 0
    assert data.exists()

    assert main([
        "train", "--data", str(data), "--config", str(config_path),
        "--out", str(ckpt), "--seed", "3",
    ]) == 0
    assert ckpt.exists()

    assert main([
        "detect", "--ckpt", str(ckpt), "--data", str(data), "--alerts", str(alerts),
    ]) == 0
    assert alerts.exists()
    for line in alerts.read_text().splitlines():
        assert json.loads(line)["alert"] is True

    assert main([
        "eval", "--ckpt", str(ckpt), "--data", str(data),
        "--report", str(report), "--baseline",
    ]) == 0
    doc = json.loads(report.read_text())
    assert "baseline" in doc
    assert 0.0 <= doc["model"]["f1"] <= 1.0
    capsys.readouterr()


def test_eval_without_baseline_flag(workspace):
    root, scenario_path, config_path = workspace
    report = root / "nobaseline.json"
    assert main([
        "eval", "--ckpt", str(root / "model.ckpt"), "--data", str(root / "stream.jsonl"),
        "--report", str(report),
    ]) == 0
    assert "baseline" not in json.loads(report.read_text())


def test_unknown_flag_is_usage_error(capsys):
    assert main(["generate", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_command_is_usage_error(capsys):
    assert main(["transmogrify"]) == 1
    capsys.readouterr()


def test_missing_required_argument(capsys):
    assert main(["train", "--data", "x.jsonl"]) == 1
    capsys.readouterr()


def test_runtime_error_exit_code(workspace, tmp_path, capsys):
    root, _, _ = workspace
    missing = tmp_path / "missing.jsonl"
    assert main([
        "detect", "--ckpt", str(root / "model.ckpt"), "--data", str(missing),
        "--alerts", str(tmp_path / "alerts.jsonl"),
    ]) == 2
    capsys.readouterr()


def test_generate_seed_override(workspace, tmp_path):
    _, scenario_path, _ = workspace
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    c = tmp_path / "c.jsonl"
    assert main(["generate", "--scenario", str(scenario_path), "--out", str(a), "--seed", "1"]) == 0
    assert main(["generate", "--scenario", str(scenario_path), "--out", str(b), "--seed", "1"]) == 0
    assert main(["generate", "--scenario", str(scenario_path), "--out", str(c), "--seed", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_verbose_detect_includes_non_alerts(workspace, tmp_path):
    root, _, _ = workspace
    alerts = tmp_path / "verbose.jsonl"
    assert main([
        "detect", "--ckpt", str(root / "model.ckpt"), "--data", str(root / "stream.jsonl"),
        "--alerts", str(alerts), "--verbose",
    ]) == 0
    lines = [json.loads(line) for line in alerts.read_text().splitlines()]
    assert any(not line["alert"] for line in lines)
    assert len(lines) > 1000
