"""
Trial-based heuristic tree search over a GroundMdp

Decision nodes choose robot actions with UCB1; chance nodes hold the exact
successor distribution of (robot action, forecast human action) under the
learned human success table and are sampled among their unsolved outcomes.
Leaves are initialized with an iterative-deepening lookahead along the most
likely outcomes, and values are propagated with partial Bellman backups.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import NoApplicableAction
from .mdp import (NOOP, GroundMdp, JointAction, State, applicable_actions, goal_satisfied,
                  transition_distribution)

logger = logging.getLogger(__name__)

BROAD = "broad"
INFORMATIVE = "informative"
MIXED = "mixed"
PROFILES = (BROAD, INFORMATIVE, MIXED)

HumanPolicy = Callable[[State], str]


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 60
    trials: int = 2000
    exploration: float = math.sqrt(2)
    init_depth: int = 3
    profile: str = MIXED
    discount: float = 1.0
    seed: int = 0
    include_noop: bool = True
    ids_budget: int = 5000  # successor evaluations per heuristic initialization
    heuristic_weight: int = 1  # pseudo-visits credited to an initialized Q-value

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("planning horizon must be at least 1")
        if self.trials < 1:
            raise ValueError("trial budget must be at least 1")
        if self.exploration <= 0:
            raise ValueError("exploration constant must be positive")
        if self.init_depth < 0:
            raise ValueError("heuristic depth must be non-negative")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown exploration profile '{self.profile}'")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")


# ---------------------------------------------------------------- tree

class ChanceNode:
    __slots__ = ("action", "visits", "q", "solved", "outcomes", "children", "leaves")

    def __init__(self, action: JointAction, q: float = 0.0, visits: int = 0):
        self.action = action
        self.visits = visits
        self.q = q
        self.solved = False
        self.outcomes: Optional[List[Tuple[float, State, float]]] = None
        self.children: Dict[int, "DecisionNode"] = {}
        self.leaves = 0


class DecisionNode:
    __slots__ = ("state", "depth", "visits", "value", "solved", "terminal", "children", "leaves")

    def __init__(self, state: State, depth: int, terminal: bool = False):
        self.state = state
        self.depth = depth
        self.visits = 0
        self.value = 0.0
        self.solved = terminal
        self.terminal = terminal
        self.children: Dict[str, ChanceNode] = {}
        self.leaves = 1

    @property
    def expanded(self) -> bool:
        return self.terminal or bool(self.children)


class SearchTree:
    """One planning problem: the MDP, the human forecast and the node tree rooted at ``s``."""

    def __init__(self, mdp: GroundMdp, s: State, config: PlannerConfig,
                 human_policy: Optional[HumanPolicy] = None, expand_root: bool = True):
        self.mdp = mdp
        self.config = config
        self.human_policy = human_policy
        self.trials = 0
        self.size = 0
        self._ids_cache: Dict[Tuple[State, int], float] = {}
        self._actions: Dict[int, List[str]] = {}
        self._outcomes: Dict[Tuple[State, str], List[Tuple[float, State, float]]] = {}
        if expand_root:
            self.root = self.new_node(s, 0)
        else:
            self.root = DecisionNode(s, 0, self.is_terminal(s, 0))

    def human_action(self, s: State) -> str:
        return self.human_policy(s) if self.human_policy is not None else NOOP

    def is_terminal(self, s: State, depth: int) -> bool:
        return depth >= self.config.horizon or (bool(self.mdp.goal) and
                                                goal_satisfied(s, self.mdp.goal))

    def robot_actions(self, s: State) -> List[str]:
        cached = self._actions.get(s.assignment)
        if cached is not None:
            return cached
        names = applicable_actions(self.mdp, s)
        if not self.config.include_noop:
            names = [n for n in names if n != NOOP] or names
        if not names:
            raise NoApplicableAction(f"no robot action is applicable at step {s.step}")
        self._actions[s.assignment] = names
        return names

    def outcomes(self, s: State, robot: str) -> List[Tuple[float, State, float]]:
        key = (s, robot)
        outs = self._outcomes.get(key)
        if outs is None:
            a = JointAction(robot, self.human_action(s))
            outs = sorted(transition_distribution(self.mdp, s, a),
                          key=lambda o: (-o[0], o[1].assignment, sorted(o[1].milestones)))
            self._outcomes[key] = outs
        return outs

    def new_node(self, s: State, depth: int) -> DecisionNode:
        node = DecisionNode(s, depth, self.is_terminal(s, depth))
        self.size += 1
        if not node.terminal:
            estimates = ids_heuristic_init(self.mdp, s, min(self.config.init_depth,
                                                            self.config.horizon - depth - 1),
                                           tree=self)
            w = self.config.heuristic_weight
            for name, q in estimates.items():
                node.children[name] = ChanceNode(JointAction(name, self.human_action(s)), q, w)
            node.visits = w * len(node.children)
            node.value = max(estimates.values())
        return node

    def profile(self) -> str:
        """Profile of the current trial; mixed alternates by trial parity."""
        if self.config.profile == MIXED:
            return BROAD if self.trials % 2 == 0 else INFORMATIVE
        return self.config.profile

    def exploration(self) -> float:
        c = self.config.exploration
        return 2.0 * c if self.profile() == BROAD else 0.5 * c

    def __len__(self) -> int:
        return self.size


# ---------------------------------------------------------------- search steps

def ucb_select(node: DecisionNode, c: float) -> str:
    """UCB1 over the unsolved children; unvisited ones first, ties by action name."""
    candidates = sorted(name for name, child in node.children.items() if not child.solved)
    if not candidates:
        raise ValueError("decision node has no unsolved child")
    for name in candidates:
        if node.children[name].visits == 0:
            return name
    log_n = math.log(max(node.visits, 1))
    # bonus scaled by the value magnitude keeps selection invariant to reward scaling
    scale = max(abs(node.children[n].q) for n in candidates) or 1.0
    best, best_score = candidates[0], -math.inf
    for name in candidates:
        child = node.children[name]
        score = child.q + c * scale * math.sqrt(log_n / child.visits)
        if score > best_score:
            best, best_score = name, score
    return best


def _sample_unsolved(chance: ChanceNode, rng: np.random.Generator) -> int:
    open_ = [k for k in range(len(chance.outcomes))
             if k not in chance.children or not chance.children[k].solved]
    weights = np.array([chance.outcomes[k][0] for k in open_], dtype=float)
    if len(open_) == 1:
        return open_[0]
    return open_[int(rng.choice(len(open_), p=weights / weights.sum()))]


def _backup_chance(tree: SearchTree, chance: ChanceNode, profile: str = BROAD) -> None:
    """
    Average the explored outcomes of ``chance``.

    Broad backups weight each outcome by its probability. Informative ones
    weight it by probability times the number of leaves below it until every
    outcome is solved, after which the exact expectation is used.
    """
    gamma = tree.config.discount
    explored = [(p, r, chance.children[k]) for k, (p, _, r) in enumerate(chance.outcomes)
                if k in chance.children]
    chance.solved = (len(explored) == len(chance.outcomes)
                     and all(child.solved for _, _, child in explored))
    if profile == INFORMATIVE and not chance.solved:
        weights = [p * child.leaves for p, _, child in explored]
    else:
        weights = [p for p, _, _ in explored]
    chance.q = sum(w * (r + gamma * child.value)
                   for w, (_, r, child) in zip(weights, explored)) / sum(weights)
    chance.leaves = sum(child.leaves for _, _, child in explored)


def _backup_decision(node: DecisionNode) -> None:
    node.value = max(child.q for child in node.children.values())
    node.visits = sum(child.visits for child in node.children.values())
    node.solved = all(child.solved for child in node.children.values())
    node.leaves = max(1, sum(child.leaves for child in node.children.values()))


def thts_trial(tree: SearchTree, rng: np.random.Generator) -> None:
    """One descent from the root to a new leaf, then backups along the path."""
    node = tree.root
    if node.solved:
        return
    profile = tree.profile()
    c = tree.exploration()
    path: List[Tuple[DecisionNode, ChanceNode]] = []
    while True:
        name = ucb_select(node, c)
        chance = node.children[name]
        if chance.outcomes is None:
            chance.outcomes = tree.outcomes(node.state, name)
        path.append((node, chance))
        k = _sample_unsolved(chance, rng)
        child = chance.children.get(k)
        if child is None:
            _, s_next, _ = chance.outcomes[k]
            chance.children[k] = tree.new_node(s_next, node.depth + 1)
            break
        if child.solved:
            break
        node = child
    for node, chance in reversed(path):
        chance.visits += 1
        _backup_chance(tree, chance, profile)
        _backup_decision(node)
    tree.trials += 1


# ---------------------------------------------------------------- heuristic

class _BudgetSpent(Exception):
    pass


def ids_heuristic_init(mdp: GroundMdp, s: State, depth: int,
                       human_policy: Optional[HumanPolicy] = None,
                       tree: Optional[SearchTree] = None,
                       budget: Optional[int] = None) -> Dict[str, float]:
    """
    Q-value estimates per robot action by iterative deepening along most-likely outcomes.

    Depth 0 is the immediate reward of each action's most likely successor and
    is always computed. A deeper pass is abandoned as soon as ``budget``
    successor evaluations have been spent; the last completed depth is returned.
    """
    if depth < 0:
        depth = 0
    if tree is None:
        tree = SearchTree(mdp, s, PlannerConfig(), human_policy, expand_root=False)
    budget = tree.config.ids_budget if budget is None else budget
    gamma = tree.config.discount
    spent = [0]
    limited = [False]

    def most_likely(state: State, robot: str) -> Tuple[State, float]:
        if limited[0] and spent[0] >= budget:
            raise _BudgetSpent
        outs = tree.outcomes(state, robot)
        spent[0] += 1
        _, nxt, r = outs[0]
        return nxt, r

    def value(state: State, d: int) -> float:
        if bool(mdp.goal) and goal_satisfied(state, mdp.goal):
            return 0.0
        key = (state, d)
        cached = tree._ids_cache.get(key)
        if cached is not None:
            return cached
        best = max(q_values(state, d).values())
        tree._ids_cache[key] = best
        return best

    def q_values(state: State, d: int) -> Dict[str, float]:
        out = {}
        for name in tree.robot_actions(state):
            nxt, r = most_likely(state, name)
            out[name] = r + (gamma * value(nxt, d - 1) if d > 0 else 0.0)
        return out

    result = q_values(s, 0)
    limited[0] = True
    for d in range(1, depth + 1):
        try:
            result = q_values(s, d)
        except _BudgetSpent:
            break
    return result


# ---------------------------------------------------------------- plans

@dataclass(frozen=True)
class PlanStep:
    action: JointAction
    expected_value: float
    state: State


@dataclass(frozen=True)
class Plan:
    steps: Tuple[PlanStep, ...] = ()
    value: float = 0.0
    trials: int = 0

    @property
    def actions(self) -> List[str]:
        return [step.action.robot for step in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


def _greedy(node: DecisionNode) -> str:
    return min(node.children, key=lambda n: (-node.children[n].q, n))


def extract_policy(tree: SearchTree) -> Plan:
    """Greedy action per depth along the most probable outcome of each chosen action."""
    steps: List[PlanStep] = []
    node = tree.root
    while node is not None and not node.terminal and node.children:
        name = _greedy(node)
        chance = node.children[name]
        steps.append(PlanStep(chance.action, chance.q, node.state))
        if not chance.outcomes:
            break
        node = chance.children.get(0)
    return Plan(tuple(steps), tree.root.value, tree.trials)


def plan(mdp: GroundMdp, behavior, s: Optional[State] = None,
         config: Optional[PlannerConfig] = None,
         human_policy: Optional[HumanPolicy] = None) -> Plan:
    """
    Plan from ``s`` with the human's success table taken from ``behavior``.

    Args:
        mdp: Ground MDP with the goal attached
        behavior: LearnedHumanModel (or None to keep the MDP's own table)
        s: Start state (defaults to the initial state)
        config: Planner settings
        human_policy: Forecast of the human's next action per state

    Returns:
        Plan; empty when the goal already holds in ``s``
    """
    config = config or PlannerConfig()
    s = s if s is not None else mdp.initial_state
    if behavior is not None:
        mdp = mdp.with_human_success(behavior.success_table(mdp))
    tree = SearchTree(mdp, s, config, human_policy)
    if tree.root.terminal:
        return Plan((), 0.0, 0)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.trials):
        if tree.root.solved:
            break
        thts_trial(tree, rng)
    result = extract_policy(tree)
    logger.debug("planned %d steps from %d trials (%d nodes, value %.2f, solved=%s)",
                 len(result), tree.trials, len(tree), result.value, tree.root.solved)
    return result


def exact_value(mdp: GroundMdp, s: State, horizon: int,
                human_policy: Optional[HumanPolicy] = None,
                include_noop: bool = True) -> Tuple[float, Dict[str, float]]:
    """Finite-horizon expectimax by exhaustive enumeration; only for small MDPs."""
    config = PlannerConfig(horizon=horizon, include_noop=include_noop)
    tree = SearchTree(mdp, s, config, human_policy, expand_root=False)
    memo: Dict[Tuple[State, int], float] = {}

    def q_values(state: State, depth: int) -> Dict[str, float]:
        return {name: sum(p * (r + v(nxt, depth + 1)) for p, nxt, r in tree.outcomes(state, name))
                for name in tree.robot_actions(state)}

    def v(state: State, depth: int) -> float:
        if tree.is_terminal(state, depth):
            return 0.0
        key = (state, depth)
        if key not in memo:
            memo[key] = max(q_values(state, depth).values())
        return memo[key]

    if tree.is_terminal(s, 0):
        return 0.0, {}
    qs = q_values(s, 0)
    return max(qs.values()), qs
