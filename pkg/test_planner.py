#!/usr/bin/env python3
"""
Tests for the trial-based tree search planner
"""

import math

import numpy as np
import pytest

from conftest import LAMPS_DOMAIN, LAMPS_INSTANCE
from core.grounding import ground
from core.human_model import TaskScript, script_policy
from core.mdp import NOOP, JointAction, State, with_goal, with_multiplier
from core.planner import (BROAD, INFORMATIVE, ChanceNode, DecisionNode, PlannerConfig,
                          SearchTree, _backup_chance, exact_value, extract_policy,
                          ids_heuristic_init, plan, thts_trial, ucb_select)
from core.rddl_lite import parse_domain, parse_instance

PICK_GLASS = "robot_pick(robot,water_glass,sink)"
SERVE_WATER = TaskScript.from_strings("serve water", ["pick water_glass sink",
                                                      "place water_glass counter"])


@pytest.fixture
def lamps_goal(lamps):
    return with_goal(lamps, lamps.goal)


def _node(**children) -> DecisionNode:
    node = DecisionNode(None, 0)
    for name, (q, visits) in children.items():
        node.children[name] = ChanceNode(JointAction(name), q, visits)
    node.visits = sum(child.visits for child in node.children.values())
    return node


def _random_lamps(domain, seed: int):
    """Small random lamp world: 2-3 lamps, random brightness, start state and goal."""
    rng = np.random.default_rng(seed)
    names = [f"l{k}" for k in range(int(rng.integers(2, 4)))]
    goal = [n for n in names if rng.random() < 0.7] or names[:1]
    bright = " ".join(f"bright({n});" for n in names if rng.random() < 0.5)
    init = [f"lit({n});" for n in names if n not in goal and rng.random() < 0.5]
    init += [f"dusty({n});" for n in names if rng.random() < 0.5]
    lamps = ", ".join(names)
    targets = " ".join(f"lit({n});" for n in goal)
    text = (f"instance random_{seed} {{\n"
            f"    domain = lamps;\n"
            f"    objects {{ robot : {{r}}; human : {{h}}; lamp : {{{lamps}}}; }};\n"
            f"    non-fluents {{ {bright} }};\n"
            f"    init-state {{ {' '.join(init)} }};\n"
            f"    goal {{ {targets} }};\n"
            f"    horizon = {int(rng.integers(2, 5))};\n"
            f"}}\n")
    mdp = ground(domain, parse_instance(text, domain, f"random_{seed}.rddl"))
    return with_goal(mdp, mdp.goal)


def _outcome_tree(lamps_goal, values, leaves):
    """Root with one chance node whose two equally likely outcomes are explored."""
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(),
                      expand_root=False)
    chance = ChanceNode(JointAction("robot_dust(r,a)"))
    chance.outcomes = [(0.5, State(1), 0.0), (0.5, State(2), 0.0)]
    for k, (value, count) in enumerate(zip(values, leaves)):
        child = DecisionNode(chance.outcomes[k][1], 1)
        child.value, child.leaves = value, count
        chance.children[k] = child
    return tree, chance


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("kwargs", [
    {"horizon": 0}, {"trials": 0}, {"exploration": 0.0}, {"init_depth": -1},
    {"profile": "greedy"}, {"discount": 0.0}, {"discount": 1.5},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PlannerConfig(**kwargs)


def test_exploration_profiles(lamps_goal):
    c = math.sqrt(2)
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(profile=BROAD))
    assert tree.exploration() == pytest.approx(2 * c)
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(profile=INFORMATIVE))
    assert tree.exploration() == pytest.approx(0.5 * c)
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig())
    assert tree.exploration() == pytest.approx(2 * c)
    tree.trials = 1
    assert tree.exploration() == pytest.approx(0.5 * c)


def test_broad_backup_is_the_expectation(lamps_goal):
    tree, chance = _outcome_tree(lamps_goal, values=(10.0, 0.0), leaves=(3, 1))
    _backup_chance(tree, chance, BROAD)
    assert chance.q == pytest.approx(5.0)
    assert chance.leaves == 4


def test_informative_backup_weights_by_leaf_count(lamps_goal):
    tree, chance = _outcome_tree(lamps_goal, values=(10.0, 0.0), leaves=(3, 1))
    _backup_chance(tree, chance, INFORMATIVE)
    assert chance.q == pytest.approx(7.5)


def test_solved_chance_node_backs_up_the_expectation(lamps_goal):
    tree, chance = _outcome_tree(lamps_goal, values=(10.0, 0.0), leaves=(3, 1))
    for child in chance.children.values():
        child.solved = True
    _backup_chance(tree, chance, INFORMATIVE)
    assert chance.solved
    assert chance.q == pytest.approx(5.0)


def test_leaf_counts_follow_expansion(lamps_goal):
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(horizon=5))
    rng = np.random.default_rng(0)
    for _ in range(30):
        thts_trial(tree, rng)
    assert 1 <= tree.root.leaves < len(tree)
    for chance in tree.root.children.values():
        assert chance.leaves == sum(child.leaves for child in chance.children.values())


# ---------------------------------------------------------------- selection

def test_ucb_prefers_unvisited_in_name_order():
    assert ucb_select(_node(b=(5.0, 3), a=(0.0, 0), c=(0.0, 0)), 1.0) == "a"


def test_ucb_ties_break_by_name():
    assert ucb_select(_node(b=(1.0, 4), a=(1.0, 4)), 1.0) == "a"


def test_ucb_exploits_and_explores():
    assert ucb_select(_node(a=(1.0, 5), b=(0.0, 5)), 0.1) == "a"
    assert ucb_select(_node(a=(1.0, 100), b=(0.9, 1)), math.sqrt(2)) == "b"


def test_ucb_skips_solved_children():
    node = _node(a=(9.0, 3), b=(1.0, 3))
    node.children["a"].solved = True
    assert ucb_select(node, 1.0) == "b"
    node.children["b"].solved = True
    with pytest.raises(ValueError):
        ucb_select(node, 1.0)


def test_ucb_concentrates_on_better_arm():
    rng = np.random.default_rng(5)
    means = {"arm0": 0.3, "arm1": 0.7}
    node = _node(arm0=(0.0, 0), arm1=(0.0, 0))
    pulls = {"arm0": 0, "arm1": 0}
    for _ in range(10_000):
        name = ucb_select(node, math.sqrt(2))
        child = node.children[name]
        reward = float(rng.random() < means[name])
        child.visits += 1
        child.q += (reward - child.q) / child.visits
        node.visits += 1
        pulls[name] += 1
    assert pulls["arm1"] / 10_000 > 0.9


# ---------------------------------------------------------------- tree

def test_trial_adds_one_node(lamps_goal):
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(horizon=5))
    assert len(tree) == 1
    thts_trial(tree, np.random.default_rng(0))
    assert len(tree) == 2
    assert tree.trials == 1


def test_root_only_policy(lamps_goal):
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(horizon=5))
    assert len(extract_policy(tree)) <= 1


def test_outcomes_are_computed_once_per_tree(lamps_goal):
    tree = SearchTree(lamps_goal, lamps_goal.initial_state, PlannerConfig(horizon=5))
    s = lamps_goal.initial_state
    assert tree.outcomes(s, "robot_dust(r,a)") is tree.outcomes(s, "robot_dust(r,a)")
    assert tree.robot_actions(s) is tree.robot_actions(s)


def test_heuristic_depth_zero(lamps):
    q = ids_heuristic_init(lamps, lamps.initial_state, 0)
    assert q == {NOOP: 0.0, "robot_dust(r,a)": -1.0, "robot_switch(r,a)": 1.0,
                 "robot_switch(r,b)": 1.0}


def test_heuristic_budget_stops_deepening(lamps_goal):
    shallow = ids_heuristic_init(lamps_goal, lamps_goal.initial_state, 0)
    assert ids_heuristic_init(lamps_goal, lamps_goal.initial_state, 3, budget=0) == shallow
    deep = ids_heuristic_init(lamps_goal, lamps_goal.initial_state, 3)
    assert deep["robot_switch(r,a)"] == pytest.approx(122.0)


# ---------------------------------------------------------------- planning

def test_exact_value(lamps_goal):
    value, q = exact_value(lamps_goal, lamps_goal.initial_state, 5)
    assert value == pytest.approx(122.0)
    assert q["robot_switch(r,a)"] == pytest.approx(122.0)
    assert q["robot_dust(r,a)"] == pytest.approx(121.0)


def test_plan_value_near_exact(lamps_goal):
    result = plan(lamps_goal, None, config=PlannerConfig(horizon=5, trials=400))
    assert abs(result.value - 122.0) <= 0.05 * 122.0
    assert 1 <= len(result) <= 5
    assert result.trials <= 400


def test_plan_is_empty_when_goal_holds(lamps_goal):
    s = lamps_goal.state_from(["lit(a)", "lit(b)"])
    result = plan(lamps_goal, None, s=s, config=PlannerConfig(horizon=5, trials=10))
    assert len(result) == 0
    assert result.actions == []


def test_plan_is_deterministic(lamps_goal):
    config = PlannerConfig(horizon=5, trials=50, seed=3)
    first, second = plan(lamps_goal, None, config=config), plan(lamps_goal, None, config=config)
    assert first.actions == second.actions
    assert first.value == second.value


def test_anticipation_moves_the_glass_first(kitchen):
    forecast = script_policy(kitchen, SERVE_WATER)
    s0 = kitchen.initial_state
    value, q = exact_value(kitchen, s0, 3, forecast)
    assert max(q, key=q.get) == PICK_GLASS
    assert value == pytest.approx(14.0)

    config = PlannerConfig(horizon=3, trials=300, init_depth=2)
    assert plan(kitchen, None, config=config, human_policy=forecast).actions[0] == PICK_GLASS


def test_without_anticipation_the_human_handles_the_glass(kitchen):
    mdp = with_multiplier(kitchen, 0.0)
    forecast = script_policy(mdp, SERVE_WATER)
    value, q = exact_value(mdp, mdp.initial_state, 3, forecast)
    assert value == pytest.approx(11.0)
    assert q[PICK_GLASS] == pytest.approx(6.0)
    assert max(q, key=q.get) != PICK_GLASS


def test_greedy_action_ignores_reward_scale(lamps):
    scaled_domain = parse_domain(LAMPS_DOMAIN.replace("lighting (2)", "lighting (20)")
                                 .replace("default = -1", "default = -10"), "lamps.rddl")
    scaled = ground(scaled_domain, parse_instance(LAMPS_INSTANCE, scaled_domain,
                                                  "two_lamps.rddl"))
    scaled.weights.update(goal=1000.0, delivery=100.0)
    scaled = with_goal(scaled, scaled.goal)
    base = with_goal(lamps, lamps.goal)
    assert exact_value(scaled, scaled.initial_state, 5)[0] == pytest.approx(1220.0)
    for seed in range(5):
        config = PlannerConfig(horizon=5, trials=60, seed=seed)
        assert plan(scaled, None, config=config).actions[:1] == \
            plan(base, None, config=config).actions[:1]


@pytest.mark.slow
def test_converged_plans_match_the_exact_optimum(lamps_domain):
    matches, seeds = 0, range(40)
    for seed in seeds:
        mdp = _random_lamps(lamps_domain, seed)
        best, q = exact_value(mdp, mdp.initial_state, mdp.horizon)
        result = plan(mdp, None, config=PlannerConfig(horizon=mdp.horizon, trials=50_000,
                                                      init_depth=1, seed=seed))
        assert abs(result.value - best) <= 0.05 * abs(best) + 1e-9
        if q[result.actions[0]] >= best - 1e-9:
            matches += 1
    assert matches >= 0.95 * len(seeds)


@pytest.mark.slow
def test_root_value_grows_with_the_trial_budget(lamps_goal):
    means = []
    for trials in (100, 1000, 10_000):
        values = [plan(lamps_goal, None, config=PlannerConfig(horizon=5, trials=trials,
                                                              init_depth=1, seed=seed)).value
                  for seed in range(20)]
        means.append(float(np.mean(values)))
    assert means[1] >= 0.99 * means[0]
    assert means[2] >= 0.99 * means[1]
