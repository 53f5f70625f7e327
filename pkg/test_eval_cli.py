#!/usr/bin/env python3
"""
Tests for the experiment suites, configuration loading and the CLI
"""

import pandas as pd
import pytest
from click.testing import CliRunner

import core.suite
from collab_cli import cli
from core.errors import ConfigError
from core.simulator import (DROP_FRAGILE, PREVENTED, ExecutionTrace, FailureEvent,
                            MetricsRecord, TaskOutcome)
from core.suite import (COMPLETION_COLUMNS, FAILURE_COLUMNS, SWEEP_COLUMNS, SuiteConfig,
                        describe_assets, interior_minima, multiplier_sweep, run_suite,
                        summarize)
from utils.config import load_config, planner_config, suite_config
from utils.io_handler import IOHandler

SALMON = {"salmon_water": ("serve salmon", "serve water")}
SWEEP_FAILURES = {0.0: 3, 1.0: 1, 2.0: 2}


def _fake_rollout(cfg, assets):
    """Cheap stand-in for a rollout: odd seeds finish half of their tasks."""
    trace = ExecutionTrace(cfg.task, cfg.agent_mode, cfg.seed, cfg.multiplier)
    trace.tasks = [TaskOutcome(t, True, "goal", 5, 4, 2, 2) for t in cfg.tasks]
    trace.failures = [FailureEvent(1, DROP_FRAGILE, "water_glass", "sink", cfg.tasks[0],
                                   PREVENTED)]
    return trace, MetricsRecord(
        avg_actions=4.0, failures=SWEEP_FAILURES.get(cfg.multiplier, 1), failures_prevented=1,
        failures_recovered=0, task_completion_rate=1.0 if cfg.seed % 2 == 0 else 0.5,
        subgoal_completion_rate=0.8)


@pytest.fixture
def fake_rollouts(monkeypatch):
    monkeypatch.setattr(core.suite, "run_rollout", _fake_rollout)
    monkeypatch.setattr("collab_cli.run_rollout", _fake_rollout)


def _write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------- suites

def test_summarize_means_per_task_and_mode():
    records = pd.DataFrame([
        {"task": "salmon_water", "mode": "ours", "seed": s, "multiplier": 1.0,
         "avg_actions": 4.0 + s, "failures": s, "failures_prevented": 1, "failures_recovered": 0,
         "task_completion_rate": 1.0 - 0.5 * s, "subgoal_completion_rate": 0.5}
        for s in (0, 1)])
    tables = summarize(records)
    completion = tables["completion"].iloc[0]
    assert list(tables["completion"].columns) == COMPLETION_COLUMNS
    assert list(tables["failures"].columns) == FAILURE_COLUMNS
    assert completion["rollouts"] == 2
    assert completion["task_completion"] == 75.0
    assert completion["subgoal_completion"] == 50.0
    assert tables["failures"].iloc[0]["avg_actions"] == 4.5


def test_run_suite_writes_tables(tmp_path, fake_rollouts):
    cfg = SuiteConfig(rollouts=2, tasks=SALMON, modes=("ours", "rddl_baseline"),
                      out_dir=str(tmp_path))
    tables = run_suite(cfg, assets=None)
    completion = IOHandler.read_table(tmp_path / "completion.csv")
    failures = IOHandler.read_table(tmp_path / "failures.csv")
    assert list(completion.columns) == COMPLETION_COLUMNS
    assert list(failures.columns) == FAILURE_COLUMNS
    assert completion["mode"].tolist() == ["ours", "rddl_baseline"]
    assert completion["task_completion"].tolist() == [75.0, 75.0]
    assert len(tables["records"]) == 4


def test_multiplier_sweep(tmp_path, fake_rollouts):
    cfg = SuiteConfig(rollouts=1, tasks=SALMON, multipliers=(0.0, 1.0, 2.0),
                      out_dir=str(tmp_path))
    table = multiplier_sweep(cfg, assets=None)
    assert list(IOHandler.read_table(tmp_path / "sweep.csv").columns) == SWEEP_COLUMNS
    assert table["failures"].tolist() == [3.0, 1.0, 2.0]
    assert interior_minima(table) == ["salmon_water"]


def test_sweep_needs_three_multipliers():
    with pytest.raises(ConfigError):
        multiplier_sweep(SuiteConfig(multipliers=(0.0, 1.0)), assets=None)


def test_interior_minima_ignores_edges():
    sweep = pd.DataFrame({"task": ["a"] * 3 + ["b"] * 3,
                          "multiplier": [0.0, 1.0, 2.0] * 2,
                          "failures": [1.0, 2.0, 3.0, 3.0, 2.0, 1.0]})
    assert interior_minima(sweep) == []


@pytest.mark.parametrize("kwargs", [
    {"rollouts": 0}, {"tasks": {}}, {"modes": ("ours", "oracle")}, {"multipliers": (-1.0,)},
    {"workers": 0},
])
def test_suite_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SuiteConfig(**kwargs)


def test_suite_rollout_seeds():
    cfg = SuiteConfig(tasks=SALMON, seed=10, multiplier=2.0)
    rollout = cfg.rollout("salmon_water", "ours", 3)
    assert (rollout.seed, rollout.multiplier, rollout.tasks) == (13, 2.0, SALMON["salmon_water"])
    assert cfg.rollout("salmon_water", "ours", 0, multiplier=0.5).multiplier == 0.5


# ---------------------------------------------------------------- configuration

def test_config_overrides_defaults(tmp_path):
    config = load_config(_write_config(tmp_path, "planner:\n  trials: 50\nsuite:\n  rollouts: 2\n"))
    assert config["planner"]["trials"] == 50
    assert config["planner"]["horizon"] == 60
    assert planner_config(config, seed=9).seed == 9
    cfg = suite_config(config, rollouts=None, workers=3)
    assert (cfg.rollouts, cfg.workers) == (2, 3)
    assert cfg.planner.trials == 50


def test_config_reaches_rollouts(tmp_path):
    config = load_config(_write_config(
        tmp_path, "anticipation:\n  remote: true\n  endpoint: http://127.0.0.1:9/predict\n"
                  "rollout:\n  model_cache: cache/model.json\n"))
    rollout = suite_config(config, tasks=SALMON).rollout("salmon_water", "ours", 0)
    assert rollout.remote_predictor is True
    assert rollout.remote_endpoint == "http://127.0.0.1:9/predict"
    assert rollout.model_cache == "cache/model.json"
    assert suite_config(config, model_cache="other.json").model_cache == "other.json"


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="planer"):
        load_config(_write_config(tmp_path, "planer:\n  trials: 50\n"))
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, "planner: [1, 2]\n"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    with pytest.raises(ConfigError):
        planner_config(load_config(_write_config(tmp_path, "planner:\n  horizon: 0\n")))


# ---------------------------------------------------------------- CLI

def test_cli_help():
    result = CliRunner().invoke(cli, [])
    assert result.exit_code == 0
    assert "suite" in result.output and "sweep" in result.output


def test_cli_rejects_quiet_and_verbose():
    result = CliRunner().invoke(cli, ["--quiet", "--verbose", "assets"])
    assert result.exit_code == 1


def test_cli_suite_rejects_zero_rollouts():
    result = CliRunner().invoke(cli, ["suite", "--rollouts", "0"])
    assert result.exit_code == 1
    assert "Error:" in result.output
    assert "rollout count" in result.output


def test_cli_reports_missing_domain(tmp_path):
    config = _write_config(tmp_path, "assets:\n  domain: missing.rddl\n")
    result = CliRunner().invoke(cli, ["--config", config, "assets"])
    assert result.exit_code == 1
    assert "missing.rddl" in result.output


def test_cli_suite(tmp_path, fake_rollouts):
    out = tmp_path / "results"
    result = CliRunner().invoke(cli, ["suite", "--rollouts", "1", "--mode", "ours",
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "Suite Summary" in result.output
    assert (out / "completion.csv").exists() and (out / "failures.csv").exists()


def test_cli_rollout(tmp_path, fake_rollouts):
    result = CliRunner().invoke(cli, ["rollout", "--task", "salmon_water", "--seed", "2",
                                      "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "Instance: salmon_water" in result.output
    assert (tmp_path / "trace-2.jsonl").exists()

    result = CliRunner().invoke(cli, ["rollout", "--task", "attic"])
    assert result.exit_code == 1
    assert "attic" in result.output


def test_cli_rollout_model_cache(tmp_path, monkeypatch):
    seen = []

    def capture(cfg, assets):
        seen.append(cfg)
        return _fake_rollout(cfg, assets)

    monkeypatch.setattr("collab_cli.run_rollout", capture)
    cache = str(tmp_path / "model.json")
    result = CliRunner().invoke(cli, ["rollout", "--task", "salmon_water", "--model-cache", cache])
    assert result.exit_code == 0, result.output
    assert seen[0].model_cache == cache


@pytest.mark.slow
def test_cli_assets():
    result = CliRunner().invoke(cli, ["assets"])
    assert result.exit_code == 0, result.output
    assert "Tasks in sample space: 11" in result.output
    assert "cleaning" in result.output
    assert "toast_coffee" in result.output


@pytest.mark.slow
def test_describe_assets(assets):
    report = describe_assets(assets)
    assert (report["tasks"], report["sequences"], report["templates"]) == (11, 3, 8)
    assert report["categories"]["cleaning"] == 5
    assert sorted(report["instances"]) == ["cereal_coffee", "coffee_washdish", "pizza_washdish",
                                           "salmon_water", "toast_coffee"]
    salmon = report["instances"]["salmon_water"]
    assert salmon["horizon"] == 60
    assert salmon["objects"]["robot"] == 1
    assert salmon["robot_actions"] > 0 and salmon["human_actions"] > 0
