#!/usr/bin/env python3
"""
Suite-scale checks: runtime of a reduced suite, the ordering of the agent
modes and the shape of the multiplier sweep
"""

import time

import pytest

from conftest import BASE_DIR
from core.simulator import LLM_BASELINE, OURS, RDDL_BASELINE
from core.suite import interior_minima, multiplier_sweep, run_suite
from utils.config import load_config, suite_config


def _suite(tmp_path, **overrides):
    config = load_config(BASE_DIR / "config.yaml")
    return suite_config(config, out_dir=str(tmp_path), **overrides)


@pytest.mark.slow
def test_reduced_suite_runtime(assets, tmp_path):
    cfg = _suite(tmp_path, rollouts=2, workers=2,
                 tasks={"salmon_water": ("serve salmon", "serve water")})
    started = time.perf_counter()
    tables = run_suite(cfg, assets)
    elapsed = time.perf_counter() - started
    assert len(tables["records"]) == 2 * len(cfg.modes)
    # generous per-rollout allowance on a shared machine
    assert elapsed < 60.0 * len(tables["records"])


@pytest.mark.slow
def test_anticipation_beats_both_baselines(assets, tmp_path):
    cfg = _suite(tmp_path, workers=4)
    completion = run_suite(cfg, assets)["completion"]
    means = completion.groupby("mode")["task_completion"].mean()
    assert means[OURS] > means[RDDL_BASELINE] > means[LLM_BASELINE]
    assert means[OURS] - means[RDDL_BASELINE] >= 10.0


@pytest.mark.slow
def test_failures_bottom_out_at_an_interior_multiplier(assets, tmp_path):
    cfg = _suite(tmp_path, workers=4)
    sweep = multiplier_sweep(cfg, assets)
    assert len(interior_minima(sweep)) >= 3
