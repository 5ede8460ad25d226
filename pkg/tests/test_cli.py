import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ggiwt import cli, config
from ggiwt.sim import monte_carlo

SMALL = {"scenario": {"duration": 6}, "run": {"runs": 2}}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


def test_run_writes_all_outputs(tmp_path, small_config):
    out = tmp_path / "res"
    assert run(["run", "--config", small_config, "--scenario", 2, "--seed", 3, "--out", out]) == 0
    with open(out / "metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["scan", "filter", "total_rms", "c_l", "c_m", "c_f", "c_t"]
    assert len(rows) == 1 + 3 * 7
    with open(out / "cardinality.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["scan", "filter", "mean_card", "true_card"]
    assert b"\r\n" not in (out / "metrics.csv").read_bytes()
    lines = (out / "trajectories.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert {"run", "filter", "birth_time", "states", "extents", "smoothed"} <= set(rec)
    assert all(len(e) == 4 for e in rec["extents"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["run"]["seed"] == 3 and manifest["scenario"]["id"] == 2


def test_csv_round_trip_is_exact(tmp_path, small_config):
    out = tmp_path / "res"
    assert run(["run", "--config", small_config, "--seed", 8, "--out", out]) == 0
    settings = config.load(small_config, {"run": {"seed": 8}})
    result = monte_carlo(settings.scenario, settings.run.filter_names, settings.run.runs, settings.run.seed)
    parsed = cli.read_metrics(out / "metrics.csv")
    card = cli.read_cardinality(out / "cardinality.csv")
    for f in result.filters:
        rep = result.rms[f]
        assert np.array_equal(parsed[f]["total_rms"], rep.total)
        assert np.array_equal(parsed[f]["c_t"], rep.c_t)
        assert np.array_equal(card[f]["mean_card"], rep.est_card)


def test_manifest_reproduces_run(tmp_path, small_config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["run", "--config", small_config, "--filters", "trajectory", "--seed", 4, "--out", a]) == 0
    assert run(["run", "--config", a / "manifest.json", "--out", b]) == 0
    for name in ("metrics.csv", "cardinality.csv", "trajectories.jsonl", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_output_directory_from_environment(tmp_path, small_config, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert run(["run", "--config", small_config, "--filters", "baseline", "--runs", 1]) == 0
    assert (tmp_path / "env" / "metrics.csv").exists()


def test_unknown_scenario_exits_1(tmp_path, capsys):
    assert run(["run", "--scenario", 3, "--out", tmp_path]) == cli.EXIT_CONFIG
    assert "unknown scenario" in capsys.readouterr().err


@pytest.mark.parametrize("raw,message", [
    ({"motion": {"eta": 0.5}}, "forgetting factor must exceed 1"),
    ({"filter": {"prune_T": -1.0}}, "prune_T must be positive"),
    ({"filter": {"typo": 1}}, "unknown key filter.typo"),
    ({"bogus": {}}, "unknown config section 'bogus'"),
    ({"run": {"runs": 0}}, "runs must be an integer >= 1"),
])
def test_validate_reports_problems(tmp_path, capsys, raw, message):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    assert run(["validate", path]) == cli.EXIT_CONFIG
    assert message in capsys.readouterr().err


def test_validate_lists_every_problem(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"motion": {"eta": 0.5}, "filter": {"prune_T": -1.0}}))
    assert run(["validate", path]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "forgetting factor" in err and "prune_T" in err


def test_validate_defaults_prints_effective_config(capsys, tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    assert run(["validate", path]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(config.dumps(config.load()))
    assert printed["filter"]["p_detect"] == 0.99 and printed["motion"]["eta"] == 2.0


def test_bad_json_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["validate", bad]) == cli.EXIT_CONFIG
    assert run(["validate", tmp_path / "missing.json"]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "not valid JSON" in err and "cannot read config" in err


def test_runtime_failure_exits_2(tmp_path, small_config, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("simulated failure")

    monkeypatch.setattr(cli, "monte_carlo", boom)
    assert run(["run", "--config", small_config, "--out", tmp_path]) == cli.EXIT_RUNTIME
    assert "simulated failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ggiwt", "validate", "--config", str(tmp_path / "none.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
