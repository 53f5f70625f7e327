#!/usr/bin/env python3
"""
Tests for outcome noise, task scripts, the ground-truth human and the learned
behaviour model
"""

import random

import numpy as np
import pytest

from core.errors import EmptyTrajectorySet
from core.human_model import (FAILURE, SUCCESS, GroundTruthHumanModel, LearnedHumanModel,
                              NoiseConfig, ScriptStep, TaskInstance, TaskScript, TrialStep,
                              UniformHumanModel, bootstrap_model, context_of,
                              effective_probability, fit_from_trials, infer_outcome, next_step,
                              perturb_outcome, predict_outcome_dist, script_policy,
                              simulate_trial, update_online)
from core.mdp import NOOP, JointAction, State, successor

PICK = "human_pick(human,water_glass,sink)"
PLACE = "human_place(human,water_glass,counter)"
SERVE_WATER = TaskScript.from_strings("serve water", ["pick water_glass sink",
                                                      "place water_glass counter"])
CONTEXT = ("kitchen", "human_pick", ("human", "item", "location"), True)


def _step(success: bool, context=CONTEXT) -> TrialStep:
    return TrialStep(State(0), PICK, State(0), context, success)


# ---------------------------------------------------------------- noise

def test_effective_probability():
    assert effective_probability(0.8, 0.05, 0.1) == 0.8
    assert effective_probability(0.8, -0.5, 0.1) == pytest.approx(0.4)
    assert effective_probability(0.8, 0.5, 0.1) == 1.0
    assert effective_probability(0.8, -2.0, 0.1) == 0.0


def test_zero_probability_always_fails():
    rng = np.random.default_rng(0)
    config = NoiseConfig(stddev=0.3)
    assert not any(perturb_outcome(0.0, config, rng) for _ in range(2000))


def test_disabled_noise_is_plain_bernoulli():
    rng = np.random.default_rng(1)
    config = NoiseConfig(enabled=False)
    hits = sum(perturb_outcome(0.3, config, rng) for _ in range(20_000))
    assert abs(hits / 20_000 - 0.3) < 0.02


def test_perturb_rejects_non_probability():
    with pytest.raises(ValueError):
        perturb_outcome(1.5, NoiseConfig(), np.random.default_rng(0))


def test_default_noise_dents_a_certain_action():
    # only the sub-threshold negative tail can pull a nominal 1.0 below one
    rng = np.random.default_rng(4)
    rate = np.mean([perturb_outcome(1.0, NoiseConfig(), rng) for _ in range(20_000)])
    assert rate == pytest.approx(0.9648, abs=0.01)


def test_noise_config():
    config = NoiseConfig(stddev=0.1, threshold_ratio=0.5, verb_scale={"move": 0.5})
    assert config.failure_threshold == pytest.approx(0.05)
    assert config.complexity_scale("pick", fragile=True) == 1.5
    assert config.complexity_scale("pick", fragile=False) == 1.0
    assert config.complexity_scale("move", fragile=True) == 0.5
    with pytest.raises(ValueError):
        NoiseConfig(stddev=0.0)


# ---------------------------------------------------------------- scripts

def test_script_step_alternatives():
    step = ScriptStep.parse("pick water_glass|cup sink")
    assert step.options == 2
    assert step.resolve(1).concrete_args == ("cup", "sink")
    assert step.resolve(5).concrete_args == ("cup", "sink")
    assert str(step) == "pick water_glass|cup sink"


def test_task_script_alternatives():
    script = TaskScript.from_strings("serve", ["pick bread|water_glass counter", "move dining_room"])
    assert script.options == 2
    assert script.alternative_items() == [("bread", "water_glass")]
    assert script.nominal().steps[0].concrete_args == ("bread", "counter")


def test_script_policy_forecasts_next_step(kitchen):
    forecast = script_policy(kitchen, SERVE_WATER)
    s0 = kitchen.initial_state
    assert forecast(s0) == PICK
    s1 = successor(kitchen, s0, JointAction(NOOP, PICK), True)
    assert forecast(s1) == PLACE
    s2 = successor(kitchen, s1, JointAction(NOOP, PLACE), True)
    assert next_step(kitchen, SERVE_WATER, s2) is None
    assert forecast(s2) == NOOP


def test_context_and_inferred_outcome(kitchen):
    s0 = kitchen.initial_state
    ctx = context_of(kitchen, PICK)
    assert (ctx[0], ctx[1], ctx[3]) == ("kitchen", "human_pick", True)
    assert context_of(kitchen, "human_pick(human,bread,counter)")[3] is False
    ok = successor(kitchen, s0, JointAction(NOOP, PICK), True)
    failed = successor(kitchen, s0, JointAction(NOOP, PICK), False)
    assert infer_outcome(kitchen, s0, PICK, ok)
    assert not infer_outcome(kitchen, s0, PICK, failed)


def test_context_follows_the_human(kitchen):
    s0 = kitchen.initial_state
    here = kitchen.index("human-loc(human,kitchen)")
    there = kitchen.index("human-loc(human,dining_room)")
    away = State((s0.assignment & ~(1 << here)) | (1 << there), s0.step)
    assert context_of(kitchen, PICK)[0] == "kitchen"
    assert context_of(kitchen, PICK, away)[0] == "dining_room"
    assert context_of(kitchen, "human_move(human,kitchen)", away)[0] == "kitchen"


# ---------------------------------------------------------------- ground truth

def test_noiseless_trial_follows_script(kitchen):
    task = TaskInstance("serve water", kitchen, SERVE_WATER)
    trial = simulate_trial(task, GroundTruthHumanModel.noiseless(), np.random.default_rng(0))
    assert [step.action for step in trial] == [PICK, PLACE]
    assert all(step.success for step in trial)
    assert "obj-loc(water_glass,counter)" in kitchen.true_fluents(trial[-1].next_state)


def test_certain_deviation_stops_after_first_action(kitchen):
    gt = GroundTruthHumanModel(success={}, deviation_probability=1.0, fragile_preference=0.0,
                               noise=NoiseConfig(enabled=False))
    trial = simulate_trial(TaskInstance("serve water", kitchen, SERVE_WATER), gt,
                           np.random.default_rng(0))
    assert [step.action for step in trial] == [PICK]


def test_failed_pick_breaks_the_glass(kitchen):
    gt = GroundTruthHumanModel(success={"human_pick": {"water_glass": 0.0}},
                               noise=NoiseConfig(enabled=False))
    trial = simulate_trial(TaskInstance("serve water", kitchen, SERVE_WATER), gt,
                           np.random.default_rng(0), max_steps=1)
    assert len(trial) == 1 and not trial[0].success
    assert "broken(water_glass)" in kitchen.true_fluents(trial[0].next_state)


def test_success_probability_lookup(kitchen):
    gt = GroundTruthHumanModel(success={"human_pick": {"fragile": 0.7, "default": 0.9}})
    assert gt.success_probability(kitchen, PICK) == 0.7
    assert gt.success_probability(kitchen, "human_pick(human,bread,counter)") == 0.9
    assert gt.success_probability(kitchen, "human_move(human,hallway)") == 1.0


def test_ground_truth_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        GroundTruthHumanModel(success={"human_pick": {"default": 1.2}})


def test_fragile_preference(kitchen):
    script = TaskScript.from_strings("serve", ["pick bread|water_glass counter"])
    rng = np.random.default_rng(0)
    always = GroundTruthHumanModel(success={}, fragile_preference=1.0)
    never = GroundTruthHumanModel(success={}, fragile_preference=0.0)
    assert always.choose_script(script, kitchen, rng).steps[0].concrete_args[0] == "water_glass"
    assert never.choose_script(script, kitchen, rng).steps[0].concrete_args[0] == "bread"


def test_shipped_ground_truth(assets):
    gt = assets.ground_truth
    assert gt.deviation_probability == 0.02
    assert gt.away_room == "hallway"
    assert gt.fragile_preference == 0.7


# ---------------------------------------------------------------- learned model

def test_fit_from_trials_smooths_counts():
    trials = [[_step(True)] * 5, [_step(False)] * 3]
    model = fit_from_trials(trials)
    assert model.counts[CONTEXT] == [5, 3]
    assert model.probability(CONTEXT) == pytest.approx(0.6)
    assert model.outcome_dist(CONTEXT) == {SUCCESS: pytest.approx(0.6), FAILURE: pytest.approx(0.4)}


def test_fit_requires_trajectories():
    with pytest.raises(EmptyTrajectorySet):
        fit_from_trials([])


def test_fit_is_order_invariant():
    other = ("hallway", "human_move", ("human", "room"), False)
    trials = [[_step(True), _step(False, other)], [_step(False)], [_step(True, other)] * 2]
    shuffled = list(trials)
    random.Random(4).shuffle(shuffled)
    assert fit_from_trials(trials) == fit_from_trials(reversed(trials)) == fit_from_trials(shuffled)


def test_online_updates_match_batch_fit():
    steps = [_step(k % 3 != 0) for k in range(9)]
    model = LearnedHumanModel()
    for step in steps:
        update_online(model, step)
    assert model == fit_from_trials([steps])


def test_unseen_context_is_even_odds():
    model = LearnedHumanModel()
    assert model.probability(CONTEXT) == 0.5
    for _ in range(100):
        model.update(CONTEXT, True)
    assert model.probability(CONTEXT) == pytest.approx(101 / 102)


def test_online_update_from_raw_observation(kitchen):
    s0 = kitchen.initial_state
    failed = successor(kitchen, s0, JointAction(NOOP, PICK), False)
    model = update_online(LearnedHumanModel(), (s0, PICK, failed), kitchen)
    assert model.counts[context_of(kitchen, PICK)] == [0, 1]
    assert update_online(model, (s0, NOOP, s0), kitchen) == model
    with pytest.raises(ValueError):
        update_online(model, (s0, PICK, failed))


def test_predicted_outcome_dist(kitchen):
    model = LearnedHumanModel({context_of(kitchen, PICK): [3, 1]})
    dist = predict_outcome_dist(model, kitchen, kitchen.initial_state, PICK)
    assert dist[SUCCESS] == pytest.approx(4 / 6)
    assert sum(dist.values()) == pytest.approx(1.0)
    assert model.success_table(kitchen)[PICK] == pytest.approx(4 / 6)


def test_uniform_model_never_learns():
    model = UniformHumanModel()
    model.update(CONTEXT, False)
    assert model.counts == {}
    assert model.probability(CONTEXT) == 0.5


def test_model_persistence(tmp_path):
    model = fit_from_trials([[_step(True), _step(False), _step(True)]])
    path = tmp_path / "model.json"
    model.save(path)
    assert LearnedHumanModel.load(path) == model
    copy = model.copy()
    copy.update(CONTEXT, True)
    assert copy != model


def test_bootstrap_model(kitchen):
    task = TaskInstance("serve water", kitchen, SERVE_WATER)
    model = bootstrap_model([task], GroundTruthHumanModel.noiseless(), np.random.default_rng(0),
                            trials=3)
    assert model.counts[context_of(kitchen, PICK)] == [3, 0]
    assert model.counts[context_of(kitchen, PLACE)] == [3, 0]


# ---------------------------------------------------------------- fitting the shipped human

NOMINAL = {
    "human_move(human,kitchen)": 0.8,
    "human_pick(human,bread,counter)": 0.625,
    "human_put_in(human,bread,toaster)": 0.6,
    "human_switch(human,toaster)": 0.625,
}


def _fit(mdp, gt, action: str, draws: int, rng) -> float:
    model = LearnedHumanModel()
    context = context_of(mdp, action)
    for _ in range(draws):
        model.update(context, gt.outcome(mdp, action, rng))
    return model.probability(context)


@pytest.mark.slow
@pytest.mark.parametrize("action", sorted(NOMINAL))
def test_long_run_success_frequency(kitchen, assets, action):
    rng = np.random.default_rng(11)
    rate = np.mean([assets.ground_truth.outcome(kitchen, action, rng) for _ in range(10_000)])
    assert rate == pytest.approx(NOMINAL[action], abs=0.02)


@pytest.mark.parametrize("action", sorted(NOMINAL))
def test_fit_after_many_trials(kitchen, assets, action):
    fitted = _fit(kitchen, assets.ground_truth, action, 1000, np.random.default_rng(3))
    assert fitted == pytest.approx(NOMINAL[action], abs=0.05)


def test_fit_after_few_trials_is_usually_close(kitchen, assets):
    action = "human_pick(human,bread,counter)"
    rng = np.random.default_rng(6)
    close = sum(abs(_fit(kitchen, assets.ground_truth, action, 10, rng) - NOMINAL[action]) <= 0.15
                for _ in range(100))
    assert close >= 65
