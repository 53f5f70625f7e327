#!/usr/bin/env python3
"""
Tests for prompt building, next-task prediction and joint goal composition
"""

import json

import pytest

from core.anticipation import (CHAIN_OF_THOUGHT, FEW_SHOT, MockFrequencyPredictor,
                               RemoteLLMPredictor, SceneGraph, UserSequenceHistory,
                               build_prompt, compose_joint_goal, filter_valid, load_goal_table,
                               load_history, load_scene, load_task_space, parse_response,
                               predict_tasks)
from core.errors import (AssetLoadError, MalformedResponse, NoTemplateMatch,
                         PredictorUnavailable, UnknownCurrentTask)

SECTIONS = ("### Task sample space", "### Scene", "### Current task")


class _Unavailable:
    def predict(self, prompt):
        raise PredictorUnavailable("offline")

    def plan_actions(self, prompt, goal_tasks):
        raise PredictorUnavailable("offline")


def _prompt(assets, current="serve salmon", history=None, strategy=FEW_SHOT):
    history = assets.history if history is None else history
    return build_prompt(strategy, assets.space, history, assets.scene, current)


# ---------------------------------------------------------------- assets

def test_shipped_assets(assets):
    assert len(assets.space) == 11
    assert {k: len(v) for k, v in assets.scene.categories.items()} == {
        "food": 9, "appliances": 8, "cutlery": 9, "cleaning": 5}
    assert len(assets.history.sequences) == 3
    assert assets.scene.room_of("mop") == "hallway"
    assert all(assets.goals.matches(task) for task in assets.space.tasks)


def test_history_keeps_three_most_recent():
    history = UserSequenceHistory(tuple((f"task {k}",) for k in range(5)))
    assert history.sequences == (("task 0",), ("task 1",), ("task 2",))


def test_loader_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(AssetLoadError, match="bad.json"):
        load_task_space(bad)
    with pytest.raises(AssetLoadError):
        load_task_space(tmp_path / "missing.json")

    dupes = tmp_path / "tasks.json"
    dupes.write_text(json.dumps([{"verb": "serve", "args": ["tea"]}] * 2), encoding="utf-8")
    with pytest.raises(AssetLoadError, match="serve tea"):
        load_task_space(dupes)

    history = tmp_path / "history.json"
    history.write_text(json.dumps({"serve tea": 1}), encoding="utf-8")
    with pytest.raises(AssetLoadError):
        load_history(history)

    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps({"rooms": {"kitchen": ["mop"], "hallway": ["mop"]}}),
                     encoding="utf-8")
    with pytest.raises(AssetLoadError, match="mop"):
        load_scene(scene)

    goals = tmp_path / "goals.json"
    goals.write_text(json.dumps({"templates": [{"pattern": "serve {x}"}]}), encoding="utf-8")
    with pytest.raises(AssetLoadError):
        load_goal_table(goals)


def test_goal_templates(assets):
    goal = assets.goals.goal_for("serve pizza")
    assert [(lit.name, lit.args, lit.positive) for lit in goal] == [
        ("obj-loc", ("pizza", "table"), True)]
    with pytest.raises(NoTemplateMatch):
        assets.goals.goal_for("fly kite")
    steps = [str(step) for step in assets.goals.script("serve water").steps]
    assert steps == ["pick water_glass sink", "place water_glass counter"]


# ---------------------------------------------------------------- prompts

def test_few_shot_prompt_sections(assets):
    text = _prompt(assets).text
    positions = [text.index(header) for header in
                 ("### Task sample space", "### Previous user sequences", "### Scene",
                  "### Current task")]
    assert positions == sorted(positions)
    assert "Example 3: serve pizza -> wash dishes" in text
    assert "Example 4:" not in text
    assert "- wash dishes" in text
    assert text.split("### Current task\n")[1].startswith("serve salmon")


def test_zero_shot_placeholder(assets):
    text = _prompt(assets, history=UserSequenceHistory()).text
    assert "(no previous sequences; answer zero-shot)" in text
    assert "Example 1:" not in text


def test_chain_of_thought_prompt(assets):
    text = _prompt(assets, strategy=CHAIN_OF_THOUGHT).text
    assert all(header in text for header in SECTIONS)
    assert "### Worked examples" in text
    assert "### Previous user sequences" not in text
    assert text.count("Reasoning:") == 2
    assert "Think step by step" in text


def test_prompt_rejects_unknown_task(assets):
    with pytest.raises(UnknownCurrentTask):
        _prompt(assets, current="bake cake")
    with pytest.raises(ValueError):
        _prompt(assets, strategy="zero-shot")


# ---------------------------------------------------------------- prediction

def test_mock_without_history_pads_lexicographically(assets):
    prompt = _prompt(assets, current="wash dishes", history=UserSequenceHistory())
    assert MockFrequencyPredictor().predict(prompt) == [
        "chill juice", "clean sink", "serve cereal", "serve coffee"]
    prompt = _prompt(assets, current="chill juice", history=UserSequenceHistory())
    assert MockFrequencyPredictor().predict(prompt)[0] == "chill juice"


def test_mock_ranks_later_tasks_nearest_first(assets):
    prompt = _prompt(assets)
    assert MockFrequencyPredictor().predict(prompt) == [
        "serve water", "serve coffee", "wash dishes", "serve cereal"]


def test_mock_prefers_more_frequent_successors(assets):
    history = UserSequenceHistory((("serve salmon", "serve water"),
                                   ("serve salmon", "serve coffee"),
                                   ("serve coffee", "serve salmon", "serve coffee")))
    prompt = _prompt(assets, history=history)
    assert MockFrequencyPredictor().predict(prompt) == [
        "serve coffee", "serve water", "chill juice", "clean sink"]


def test_mock_breaks_ties_by_name(assets):
    history = UserSequenceHistory((("serve salmon", "wash dishes"),
                                   ("serve salmon", "serve coffee")))
    prompt = _prompt(assets, history=history)
    assert MockFrequencyPredictor().predict(prompt)[:2] == ["serve coffee", "wash dishes"]


def test_mock_pads_after_successors(assets):
    history = UserSequenceHistory((("serve salmon", "serve coffee", "wash dishes"),))
    prompt = _prompt(assets, history=history)
    assert MockFrequencyPredictor().predict(prompt) == [
        "serve coffee", "wash dishes", "chill juice", "clean sink"]


def test_mock_action_plan(assets):
    prompt = _prompt(assets)
    assert MockFrequencyPredictor(assets.goals).plan_actions(prompt, ["serve water"]) == [
        "pick water_glass sink", "place water_glass counter"]
    with pytest.raises(ValueError):
        MockFrequencyPredictor().plan_actions(prompt, ["serve water"])


def test_parse_response():
    assert parse_response('["serve water", "wash dishes"]') == ["serve water", "wash dishes"]
    with pytest.raises(MalformedResponse):
        parse_response("serve water, wash dishes")
    with pytest.raises(MalformedResponse):
        parse_response('{"next": "serve water"}')
    with pytest.raises(MalformedResponse):
        parse_response("[1, 2]")


def test_fallback_predictor(assets):
    prompt = _prompt(assets)
    assert predict_tasks(_Unavailable(), prompt, MockFrequencyPredictor()) == \
        MockFrequencyPredictor().predict(prompt)
    with pytest.raises(PredictorUnavailable):
        predict_tasks(_Unavailable(), prompt)


def test_unreachable_remote_predictor(assets):
    remote = RemoteLLMPredictor("http://127.0.0.1:9/predict", timeout=1.0)
    with pytest.raises(PredictorUnavailable):
        remote.predict(_prompt(assets))


def test_filter_valid(assets):
    predicted = ["serve water", "prepare sushi", "wash dishes"]
    assert filter_valid(predicted, assets.space, assets.scene) == ["serve water", "wash dishes"]
    valid = ["serve coffee", "chill juice", "clean sink"]
    assert filter_valid(valid, assets.space, assets.scene) == valid
    empty_kitchen = SceneGraph({"kitchen": ("juice",)})
    assert filter_valid(valid, assets.space, empty_kitchen) == ["chill juice"]


# ---------------------------------------------------------------- joint goals

def _texts(goal):
    return [("" if lit.positive else "~") + f"{lit.name}({','.join(lit.args)})" for lit in goal]


def test_compose_joint_goal(assets):
    goal = compose_joint_goal("serve salmon", "serve water", assets.goals)
    assert _texts(goal) == ["obj-loc(salmon,table)", "obj-loc(water_glass,counter)",
                            "~broken(water_glass)"]


def test_compose_identical_tasks(assets):
    once = compose_joint_goal("serve water", None, assets.goals)
    assert compose_joint_goal("serve water", "serve water", assets.goals) == once
    assert len(once) == 2
