"""
Ground factored MDP - states, joint actions, transitions and rewards

A state is an int bitmask over ``GroundMdp.fluents`` plus the step counter
and the set of reward instances already paid ("milestones"). Positive
reward instances pay at most once per episode; negative ones always apply.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InapplicableAction
from .ground_expr import (Compiled, GFluent, GNode, action_trigger, change_trigger, compile_node,
                          mk_nary, mk_not)

logger = logging.getLogger(__name__)

NOOP = "noop"
ROBOT = "robot"
HUMAN = "human"

GroundLiteral = Tuple[int, bool]


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class State:
    assignment: int
    step: int = 0
    milestones: FrozenSet[str] = frozenset()

    def holds(self, index: int) -> bool:
        return bool((self.assignment >> index) & 1)


@dataclass(frozen=True)
class JointAction:
    robot: str = NOOP
    human: str = NOOP


def _without_compiled(obj, *names):
    state = dict(obj.__dict__)
    for name in names:
        state[name] = None
    return state


@dataclass(frozen=True)
class GroundAction:
    name: str
    schema: str
    args: Tuple[str, ...]
    agent: str
    precondition: GNode
    cost: GNode
    item: Optional[str] = None  # first item-typed argument, if any
    types: Tuple[str, ...] = ()
    pre_fn: Compiled = field(default=None, compare=False, repr=False)
    cost_fn: Compiled = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.pre_fn is None:
            object.__setattr__(self, "pre_fn", compile_node(self.precondition))
        if self.cost_fn is None:
            object.__setattr__(self, "cost_fn", compile_node(self.cost))

    # compiled closures do not pickle; they are rebuilt on load
    def __getstate__(self):
        return _without_compiled(self, "pre_fn", "cost_fn")

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.__post_init__()


@dataclass(frozen=True)
class RewardInstance:
    key: str
    category: str  # shaping | r1_prevent | r2_prepare | r3_penalty | delivery | subgoal | goal
    weight: float
    expr: GNode
    objects: Tuple[str, ...] = ()
    fn: Compiled = field(default=None, compare=False, repr=False)
    # one of these fluents must change (or one of these actions be taken) for a non-zero value
    changes: Optional[FrozenSet[int]] = field(default=None, compare=False, repr=False)
    actions: Optional[FrozenSet[str]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.fn is None:
            object.__setattr__(self, "fn", compile_node(self.expr))
        if self.changes is None:
            object.__setattr__(self, "changes", change_trigger(self.expr))
        if self.actions is None:
            object.__setattr__(self, "actions", action_trigger(self.expr))

    def __getstate__(self):
        return _without_compiled(self, "fn")

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.__post_init__()

    @property
    def locked(self) -> bool:
        return self.weight > 0


ANTICIPATORY = ("r1_prevent", "r2_prepare", "r3_penalty")


@dataclass(frozen=True)
class Subgoal:
    name: str
    literals: Tuple[GroundLiteral, ...]
    weight: float


@dataclass(frozen=True)
class SubgoalSet:
    subgoals: Tuple[Subgoal, ...]
    edges: Tuple[Tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.subgoals)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.subgoals)


@dataclass(frozen=True)
class RewardSpec:
    goal: Tuple[GroundLiteral, ...] = ()
    goal_weight: float = 100.0
    goal_terms: Tuple[RewardInstance, ...] = ()
    subgoal_terms: Tuple[RewardInstance, ...] = ()
    shaping_terms: Tuple[RewardInstance, ...] = ()
    r1_prevent: Tuple[RewardInstance, ...] = ()
    r2_prepare: Tuple[RewardInstance, ...] = ()
    r3_penalty: Tuple[RewardInstance, ...] = ()
    multiplier: float = 1.0
    goal_instance: Optional[RewardInstance] = None

    @property
    def base_terms(self) -> Tuple[RewardInstance, ...]:
        extra = (self.goal_instance,) if self.goal_instance is not None else ()
        return self.shaping_terms + self.goal_terms + self.subgoal_terms + extra

    @property
    def anticipatory_terms(self) -> Tuple[RewardInstance, ...]:
        return self.r1_prevent + self.r2_prepare + self.r3_penalty

    def validate(self) -> None:
        if self.multiplier < 0:
            raise ValueError("reward multiplier must be >= 0")
        shaping = [t.weight for t in self.shaping_terms + self.goal_terms + self.subgoal_terms]
        if self.goal and shaping and self.goal_weight <= max(shaping):
            raise ValueError("goal weight must exceed every shaping weight")
        for t in self.shaping_terms + self.goal_terms + self.subgoal_terms + self.r1_prevent \
                + self.r2_prepare:
            if t.weight < 0:
                raise ValueError(f"reward term {t.key} must be non-negative")
        for t in self.r3_penalty:
            if t.weight > 0:
                raise ValueError(f"penalty term {t.key} must be non-positive")


@dataclass(frozen=True, eq=False)
class GroundMdp:
    """Grounded MDP <V, A, P, R, H, s0>; immutable, share freely."""

    name: str
    fluents: Tuple[str, ...]
    fluent_atoms: Tuple[Tuple[str, Tuple[str, ...]], ...]
    robot_actions: Tuple[GroundAction, ...]
    human_actions: Tuple[GroundAction, ...]
    transition: Tuple[GNode, ...]
    reward: RewardSpec
    horizon: int
    initial_state: State
    objects: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    non_fluents: Mapping[Tuple[str, Tuple[str, ...]], float] = field(default_factory=dict)
    human_success: Mapping[str, float] = field(default_factory=dict)
    transition_fns: Tuple[Compiled, ...] = field(default=(), repr=False)
    affected_by: Mapping[str, Tuple[int, ...]] = field(default_factory=dict, repr=False)
    passive: Tuple[int, ...] = ()
    weights: Mapping[str, float] = field(default_factory=dict)
    base_reward: Optional[RewardSpec] = field(default=None, repr=False)
    _cache: Dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.transition_fns:
            object.__setattr__(self, "transition_fns",
                               tuple(compile_node(n) for n in self.transition))

    def __getstate__(self):
        return dict(self.__dict__, transition_fns=(), _cache={})

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.__post_init__()

    # -- lookups
    @property
    def fluent_index(self) -> Dict[str, int]:
        idx = self._cache.get("fluent_index")
        if idx is None:
            idx = {name: i for i, name in enumerate(self.fluents)}
            self._cache["fluent_index"] = idx
        return idx

    @property
    def actions(self) -> Dict[str, GroundAction]:
        table = self._cache.get("actions")
        if table is None:
            table = {a.name: a for a in self.robot_actions + self.human_actions}
            self._cache["actions"] = table
        return table

    def action(self, name: str) -> Optional[GroundAction]:
        return self.actions.get(name)

    def index(self, fluent: str) -> int:
        return self.fluent_index[fluent]

    def non_fluent(self, name: str, *args: str, default: float = 0.0) -> float:
        return self.non_fluents.get((name, tuple(args)), default)

    def objects_of(self, type_name: str) -> Tuple[str, ...]:
        return tuple(self.objects.get(type_name, ()))

    def room_of(self, location: str) -> Optional[str]:
        for room in self.objects_of("room"):
            if self.non_fluent("in-room", location, room):
                return room
        return None

    def literal(self, fluent: str, value: bool = True) -> GroundLiteral:
        return (self.index(fluent), value)

    def true_fluents(self, s: State) -> List[str]:
        return [name for i, name in enumerate(self.fluents) if s.holds(i)]

    @property
    def goal(self) -> Tuple[GroundLiteral, ...]:
        return self.reward.goal

    def with_human_success(self, table: Mapping[str, float]) -> "GroundMdp":
        merged = dict(self.human_success)
        merged.update(table)
        return replace(self, human_success=merged, _cache={})

    def with_reward(self, reward: RewardSpec) -> "GroundMdp":
        reward.validate()
        return replace(self, reward=reward, _cache={})

    def state_from(self, true_fluents: Sequence[str], step: int = 0) -> State:
        bits = 0
        for name in true_fluents:
            bits |= 1 << self.index(name)
        return State(bits, step)


# ---------------------------------------------------------------- goals

def goal_satisfied(s: State, g: Sequence[GroundLiteral]) -> bool:
    return all(s.holds(i) == v for i, v in g)


def subgoal_progress(s: State, subgoals: SubgoalSet) -> float:
    if not subgoals.subgoals:
        return 0.0
    done = sum(1 for sg in subgoals.subgoals if goal_satisfied(s, sg.literals))
    return done / len(subgoals.subgoals)


# ---------------------------------------------------------------- actions

def applicable_actions(mdp: GroundMdp, s: State) -> List[str]:
    """Robot actions whose precondition holds in ``s``, plus the no-op, in name order."""
    bits = s.assignment
    names = [a.name for a in mdp.robot_actions if a.pre_fn(bits, 0, "", "", 1.0) > 0.5]
    names.append(NOOP)
    return sorted(names)


def is_applicable(mdp: GroundMdp, s: State, name: str) -> bool:
    if name == NOOP:
        return True
    act = mdp.action(name)
    return act is not None and act.pre_fn(s.assignment, 0, "", "", 1.0) > 0.5


def resolve_joint_action(mdp: GroundMdp, s: State, a: JointAction) -> JointAction:
    """Drop a human action that is inapplicable or touches the robot's item."""
    if a.human == NOOP:
        return a
    if not is_applicable(mdp, s, a.human):
        return JointAction(a.robot, NOOP)
    if a.robot != NOOP:
        r, h = mdp.action(a.robot), mdp.action(a.human)
        if r is not None and h is not None and r.item is not None and r.item == h.item:
            return JointAction(a.robot, NOOP)
    return a


def action_cost(mdp: GroundMdp, s: State, name: str) -> float:
    if name == NOOP:
        return 0.0
    act = mdp.action(name)
    if act is None or act.agent != ROBOT:
        return 0.0
    return act.cost_fn(s.assignment, 0, "", "", 1.0)


# ---------------------------------------------------------------- transitions

def _affected(mdp: GroundMdp, a: JointAction) -> Tuple[int, ...]:
    key = ("affected", a.robot, a.human)
    idx = mdp._cache.get(key)
    if idx is None:
        merged = set(mdp.passive)
        merged.update(mdp.affected_by.get(a.robot, ()))
        merged.update(mdp.affected_by.get(a.human, ()))
        idx = tuple(sorted(merged))
        mdp._cache[key] = idx
    return idx


def _fluent_probs(mdp: GroundMdp, bits: int, a: JointAction, ok: float
                  ) -> Tuple[int, List[Tuple[int, float]]]:
    """Deterministic next bits and the list of (index, p) still uncertain."""
    nxt = bits
    uncertain = []
    fns = mdp.transition_fns
    for i in _affected(mdp, a):
        p = fns[i](bits, 0, a.robot, a.human, ok)
        if p >= 1.0:
            nxt |= 1 << i
        elif p <= 0.0:
            nxt &= ~(1 << i)
        else:
            uncertain.append((i, p))
    return nxt, uncertain


def human_success_probability(mdp: GroundMdp, a: JointAction) -> float:
    if a.human == NOOP:
        return 1.0
    return float(mdp.human_success.get(a.human, 1.0))


def _check_robot(mdp: GroundMdp, s: State, a: JointAction):
    if not is_applicable(mdp, s, a.robot):
        raise InapplicableAction(f"{a.robot} is not applicable at step {s.step}")


def successor(mdp: GroundMdp, s: State, a: JointAction, human_ok: bool,
              rng: Optional[np.random.Generator] = None) -> State:
    """Apply ``a`` with a fixed human outcome; Bernoulli effects draw from ``rng``."""
    _check_robot(mdp, s, a)
    a = resolve_joint_action(mdp, s, a)
    ok = 1.0 if human_ok else 0.0
    nxt, uncertain = _fluent_probs(mdp, s.assignment, a, ok)
    for i, p in uncertain:
        if rng is None:
            raise ValueError("stochastic effect needs a random source")
        if rng.random() < p:
            nxt |= 1 << i
        else:
            nxt &= ~(1 << i)
    _, _, fired = _reward_parts(mdp, s, a, nxt)
    return State(nxt, s.step + 1, s.milestones | fired if fired else s.milestones)


def sample_next(mdp: GroundMdp, s: State, a: JointAction, rng: np.random.Generator) -> State:
    """
    Sample the next state.

    The human outcome is drawn first (from ``mdp.human_success``), then every
    uncertain fluent in index order, so the draw sequence is reproducible.
    """
    _check_robot(mdp, s, a)
    resolved = resolve_joint_action(mdp, s, a)
    p = human_success_probability(mdp, resolved)
    ok = True if resolved.human == NOOP else bool(rng.random() < p)
    return successor(mdp, s, resolved, ok, rng)


def transition_distribution(mdp: GroundMdp, s: State, a: JointAction,
                            human_success: Optional[float] = None
                            ) -> List[Tuple[float, State, float]]:
    """Exact successor distribution as (probability, next state, reward) triples."""
    _check_robot(mdp, s, a)
    a = resolve_joint_action(mdp, s, a)
    if a.human == NOOP:
        branches = [(1.0, 1.0)]
    else:
        p = human_success_probability(mdp, a) if human_success is None else human_success
        branches = [(p, 1.0), (1.0 - p, 0.0)]
    merged: Dict[State, List[float]] = {}
    for weight, ok in branches:
        if weight <= 0.0:
            continue
        base, uncertain = _fluent_probs(mdp, s.assignment, a, ok)
        for combo in itertools.product((True, False), repeat=len(uncertain)):
            prob = weight
            bits = base
            for (i, p), on in zip(uncertain, combo):
                prob *= p if on else 1.0 - p
                bits = bits | (1 << i) if on else bits & ~(1 << i)
            if prob <= 0.0:
                continue
            total, _, fired = _reward_parts(mdp, s, a, bits)
            nxt = State(bits, s.step + 1, s.milestones | fired if fired else s.milestones)
            if nxt in merged:
                merged[nxt][0] += prob
            else:
                merged[nxt] = [prob, total]
    return [(p, st, r) for st, (p, r) in merged.items()]


# ---------------------------------------------------------------- rewards

@dataclass(frozen=True)
class _RewardIndex:
    terms: Tuple[RewardInstance, ...]
    always: Tuple[int, ...]
    by_fluent: Mapping[int, Tuple[int, ...]]
    by_action: Mapping[str, Tuple[int, ...]]


def _reward_index(mdp: GroundMdp) -> _RewardIndex:
    index = mdp._cache.get("reward_index")
    if index is None:
        terms = mdp.reward.base_terms + mdp.reward.anticipatory_terms
        always: List[int] = []
        by_fluent: Dict[int, List[int]] = {}
        by_action: Dict[str, List[int]] = {}
        for k, term in enumerate(terms):
            if term.changes is not None:
                for i in term.changes:
                    by_fluent.setdefault(i, []).append(k)
            elif term.actions is not None:
                for name in term.actions:
                    by_action.setdefault(name, []).append(k)
            else:
                always.append(k)
        index = _RewardIndex(terms, tuple(always),
                             {i: tuple(v) for i, v in by_fluent.items()},
                             {n: tuple(v) for n, v in by_action.items()})
        mdp._cache["reward_index"] = index
    return index


def _candidate_terms(mdp: GroundMdp, bits: int, next_bits: int, a: JointAction
                     ) -> List[RewardInstance]:
    """Terms that can be non-zero for this transition, in declaration order."""
    index = _reward_index(mdp)
    picked = set(index.always)
    changed = bits ^ next_bits
    while changed:
        low = changed & -changed
        picked.update(index.by_fluent.get(low.bit_length() - 1, ()))
        changed ^= low
    picked.update(index.by_action.get(a.robot, ()))
    picked.update(index.by_action.get(a.human, ()))
    return [index.terms[k] for k in sorted(picked)]


def _reward_parts(mdp: GroundMdp, s: State, a: JointAction, next_bits: int
                  ) -> Tuple[float, Dict[str, float], FrozenSet[str]]:
    spec = mdp.reward
    bits = s.assignment
    paid = s.milestones
    fired = []
    parts: Dict[str, float] = {"shaping": 0.0, "delivery": 0.0, "subgoal": 0.0, "goal": 0.0,
                               "r1_prevent": 0.0, "r2_prepare": 0.0, "r3_penalty": 0.0,
                               "cost": 0.0}
    for term in _candidate_terms(mdp, bits, next_bits, a):
        if term.locked and term.key in paid:
            continue
        v = term.fn(bits, next_bits, a.robot, a.human, 1.0)
        if v == 0.0:
            continue
        parts[term.category] += term.weight * v
        if term.locked:
            fired.append(term.key)
    parts["cost"] = action_cost(mdp, s, a.robot)
    base = parts["shaping"] + parts["delivery"] + parts["subgoal"] + parts["goal"] + parts["cost"]
    anticipatory = parts["r1_prevent"] + parts["r2_prepare"] + parts["r3_penalty"]
    parts["anticipatory"] = spec.multiplier * anticipatory
    total = base + spec.multiplier * anticipatory
    return total, parts, frozenset(fired)


def evaluate_reward(mdp: GroundMdp, s: State, a: JointAction, s_next: State) -> float:
    """Shaping + lambda * (R1 + R2 + R3) + action cost + newly achieved goal/subgoal bonuses."""
    a = resolve_joint_action(mdp, s, a)
    return _reward_parts(mdp, s, a, s_next.assignment)[0]


def reward_breakdown(mdp: GroundMdp, s: State, a: JointAction, s_next: State) -> Dict[str, float]:
    """Per-category contributions (anticipatory entries are before the multiplier)."""
    a = resolve_joint_action(mdp, s, a)
    return _reward_parts(mdp, s, a, s_next.assignment)[1]


# ---------------------------------------------------------------- goal attachment

def conjunction(literals: Sequence[GroundLiteral], primed: bool = False) -> GNode:
    return mk_nary("^", [GFluent(i, primed) if v else mk_not(GFluent(i, primed))
                         for i, v in literals])


def newly(literals: Sequence[GroundLiteral]) -> GNode:
    """True when the conjunction holds next step but not now."""
    return mk_nary("^", (conjunction(literals, True), mk_not(conjunction(literals, False))))


def with_goal(mdp: GroundMdp, goal: Sequence[GroundLiteral], multiplier: Optional[float] = None,
              subgoals: Optional[SubgoalSet] = None, delivery_weight: Optional[float] = None,
              focus: bool = True) -> GroundMdp:
    """
    Attach a goal (and optionally its subgoals) to ``mdp``.

    Shaping terms are narrowed to the objects named by the goal and subgoal
    literals when ``focus`` is set; anticipatory terms keep every instance.
    """
    goal = tuple(dict.fromkeys(goal))
    base = mdp.base_reward or mdp.reward
    w_goal = mdp.weights.get("goal", base.goal_weight)
    w_delivery = delivery_weight if delivery_weight is not None else mdp.weights.get("delivery", 10.0)
    w_subgoal = mdp.weights.get("subgoal", 10.0)

    delivery = tuple(RewardInstance(f"deliver[{mdp.fluents[i]}]", "delivery", w_delivery,
                                    newly([(i, v)]), ())
                     for i, v in goal)
    sub_terms: Tuple[RewardInstance, ...] = ()
    relevant = set()
    for i, _ in goal:
        relevant.update(mdp.fluent_atoms[i][1])
    if subgoals is not None:
        for sg in subgoals.subgoals:
            for i, _ in sg.literals:
                relevant.update(mdp.fluent_atoms[i][1])
        sub_terms = tuple(RewardInstance(f"subgoal[{sg.name}]", "subgoal", sg.weight or w_subgoal,
                                         newly(sg.literals), ())
                          for sg in subgoals.subgoals if tuple(sg.literals) != goal)
    shaping = base.shaping_terms
    if focus:
        always = set()
        for t in ("robot", "human", "room"):
            always.update(mdp.objects_of(t))
        shaping = tuple(t for t in shaping
                        if all(o in relevant or o in always for o in t.objects))
    goal_instance = RewardInstance("goal", "goal", w_goal, conjunction(goal, True), ()) if goal else None
    reward = replace(base, goal=goal, goal_weight=w_goal, goal_terms=delivery,
                     subgoal_terms=sub_terms, shaping_terms=shaping,
                     multiplier=mdp.reward.multiplier if multiplier is None else float(multiplier),
                     goal_instance=goal_instance)
    reward.validate()
    logger.debug("goal attached: %d literals, %d subgoals, %d shaping terms kept",
                 len(goal), len(sub_terms), len(shaping))
    return replace(mdp, reward=reward, base_reward=base, _cache={})


def with_multiplier(mdp: GroundMdp, multiplier: float) -> GroundMdp:
    return mdp.with_reward(replace(mdp.reward, multiplier=float(multiplier)))


def check_consistency(mdp: GroundMdp, s: State,
                      placement: Sequence[str] = ("obj-loc", "robot-holding", "human-holding"),
                      position: Sequence[str] = ("robot-loc", "human-loc")) -> List[str]:
    """Objects in at most one place, agents in exactly one room."""
    where: Dict[str, List[str]] = {}
    agents: Dict[str, int] = {}
    for i, (name, args) in enumerate(mdp.fluent_atoms):
        if name in position and args:
            agents.setdefault(args[0], 0)
        if not s.holds(i):
            continue
        if name in placement and args:
            item = args[0] if name == "obj-loc" else args[-1]
            where.setdefault(item, []).append(mdp.fluents[i])
        elif name in position and args:
            agents[args[0]] += 1
    problems = [f"{item} is in several places: {', '.join(places)}"
                for item, places in sorted(where.items()) if len(places) > 1]
    problems += [f"{agent} is in {count} rooms" for agent, count in sorted(agents.items())
                 if count != 1]
    return problems

