"""
Subgoal derivation from landmarks of the delete-relaxed problem.

A landmark is a literal that every relaxed plan from the initial state to the
goal must make true. Labels are computed as a greatest fixpoint: each literal
is labelled with itself plus the literals shared by all of its achievers'
condition labels. The resulting literals are ordered by the label relation
and returned as a SubgoalSet whose last element is the goal itself.
"""

import heapq
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .errors import UnreachableGoal
from .ground_expr import necessary_literals, substitute
from .mdp import (GroundLiteral, GroundMdp, State, Subgoal, SubgoalSet, goal_satisfied,
                  with_goal)

logger = logging.getLogger(__name__)

PASSIVE = "<passive>"


@dataclass(frozen=True)
class Achiever:
    action: str
    target: GroundLiteral
    conditions: FrozenSet[GroundLiteral]


def relaxed_achievers(mdp: GroundMdp) -> Tuple[Achiever, ...]:
    """Every (action, literal) pair the action can make true, with its necessary conditions."""
    cached = mdp._cache.get("achievers")
    if cached is not None:
        return cached
    out: List[Achiever] = []
    actions = mdp.robot_actions + mdp.human_actions
    for act in actions:
        pre = necessary_literals(act.precondition, True)
        if pre is None:
            continue
        only = act.name
        for i in mdp.affected_by.get(act.name, ()):
            node = substitute(mdp.transition[i], action_value=lambda n: 1.0 if n == only else 0.0,
                              interm=1.0)
            out.extend(_from_cpf(act.name, i, node, pre))
    for i in mdp.passive:
        node = substitute(mdp.transition[i], action_value=lambda _n: 0.0, interm=1.0)
        out.extend(_from_cpf(PASSIVE, i, node, frozenset()))
    result = tuple(out)
    mdp._cache["achievers"] = result
    return result


def _from_cpf(action: str, i: int, node, pre: FrozenSet[GroundLiteral]) -> Iterable[Achiever]:
    add = substitute(node, fluents={i: 0.0})
    lits = necessary_literals(add, True)
    if lits is not None:
        conds = _merge(pre, lits)
        if conds is not None:
            yield Achiever(action, (i, True), conds)
    delete = substitute(node, fluents={i: 1.0})
    lits = necessary_literals(delete, False)
    if lits is not None:
        conds = _merge(pre, lits)
        if conds is not None:
            yield Achiever(action, (i, False), conds)


def _merge(a: FrozenSet[GroundLiteral], b: FrozenSet[GroundLiteral]
           ) -> Optional[FrozenSet[GroundLiteral]]:
    merged = a | b
    if any((i, not v) in merged for i, v in merged):
        return None
    return merged


def _initial_literals(mdp: GroundMdp, s: State) -> Set[GroundLiteral]:
    return {(i, s.holds(i)) for i in range(len(mdp.fluents))}


def landmark_labels(mdp: GroundMdp, s: Optional[State] = None
                    ) -> Dict[GroundLiteral, FrozenSet[GroundLiteral]]:
    """
    Landmark label of every relaxed-reachable literal.

    Literals true in ``s`` are labelled with themselves; unreachable literals
    are absent from the result.
    """
    s = s or mdp.initial_state
    achievers = relaxed_achievers(mdp)
    start = _initial_literals(mdp, s)
    labels: Dict[GroundLiteral, FrozenSet[GroundLiteral]] = {lit: frozenset({lit}) for lit in start}

    by_target: Dict[GroundLiteral, List[Achiever]] = {}
    dependents: Dict[GroundLiteral, Set[GroundLiteral]] = {}
    for ach in achievers:
        if ach.target in start:
            continue
        by_target.setdefault(ach.target, []).append(ach)
        for c in ach.conditions:
            dependents.setdefault(c, set()).add(ach.target)

    queue = deque(sorted(by_target))
    queued = set(queue)
    while queue:
        lit = queue.popleft()
        queued.discard(lit)
        shared: Optional[FrozenSet[GroundLiteral]] = None
        for ach in by_target[lit]:
            if any(c not in labels for c in ach.conditions):
                continue
            need = frozenset().union(*(labels[c] for c in ach.conditions))
            shared = need if shared is None else shared & need
        if shared is None:
            continue
        new = shared | {lit}
        if labels.get(lit) == new:
            continue
        labels[lit] = new
        for dep in sorted(dependents.get(lit, ())):
            if dep not in queued:
                queue.append(dep)
                queued.add(dep)
    return labels


def literal_name(mdp: GroundMdp, lit: GroundLiteral) -> str:
    i, v = lit
    return mdp.fluents[i] if v else "~" + mdp.fluents[i]


def _order(mdp: GroundMdp, nodes: Sequence[GroundLiteral],
           labels: Dict[GroundLiteral, FrozenSet[GroundLiteral]]
           ) -> Tuple[List[GroundLiteral], List[Tuple[GroundLiteral, GroundLiteral]]]:
    names = {n: literal_name(mdp, n) for n in nodes}
    succ: Dict[GroundLiteral, Set[GroundLiteral]] = {n: set() for n in nodes}
    edges = []

    def reaches(a, b):
        stack, seen = [a], set()
        while stack:
            x = stack.pop()
            if x == b:
                return True
            if x in seen:
                continue
            seen.add(x)
            stack.extend(succ[x])
        return False

    for after in sorted(nodes, key=names.get):
        for before in sorted(labels[after], key=lambda x: names.get(x, "")):
            if before == after or before not in succ:
                continue
            if reaches(after, before):
                logger.debug("dropping cyclic landmark order %s -> %s",
                             names[before], names[after])
                continue
            succ[before].add(after)
            edges.append((before, after))

    indegree = {n: 0 for n in nodes}
    for _, after in edges:
        indegree[after] += 1
    heap = [(names[n], n) for n in nodes if indegree[n] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, n = heapq.heappop(heap)
        order.append(n)
        for m in sorted(succ[n], key=names.get):
            indegree[m] -= 1
            if indegree[m] == 0:
                heapq.heappush(heap, (names[m], m))
    return order, edges


def derive_subgoals(mdp: GroundMdp, goal: Optional[Sequence[GroundLiteral]] = None,
                    s: Optional[State] = None, weight: Optional[float] = None) -> SubgoalSet:
    """
    Derive ordered subgoals for ``goal`` from state ``s``.

    Args:
        mdp: Ground MDP
        goal: Goal literals (defaults to the MDP's goal)
        s: Start state (defaults to the initial state)
        weight: Reward weight of each subgoal (defaults to the domain's W_subgoal or 10)

    Returns:
        SubgoalSet ending with the goal conjunction

    Raises:
        UnreachableGoal: if some goal literal cannot be achieved even ignoring deletes
    """
    goal = tuple(dict.fromkeys(goal if goal is not None else mdp.goal))
    if not goal:
        raise ValueError("cannot derive subgoals for an empty goal")
    s = s or mdp.initial_state
    w = weight if weight is not None else mdp.weights.get("subgoal", 10.0)
    final = Subgoal("goal", goal, w)
    if goal_satisfied(s, goal):
        return SubgoalSet((final,), ())

    labels = landmark_labels(mdp, s)
    start = _initial_literals(mdp, s)
    found: Set[GroundLiteral] = set()
    for lit in goal:
        if lit not in labels:
            raise UnreachableGoal(f"no action sequence can achieve {literal_name(mdp, lit)}")
        found |= labels[lit]
    nodes = sorted(found - start - set(goal))
    order, edges = _order(mdp, nodes, labels)

    position = {lit: k for k, lit in enumerate(order)}
    subgoals = [Subgoal(literal_name(mdp, lit), (lit,), w) for lit in order]
    subgoals.append(final)
    last = len(subgoals) - 1
    index_edges = [(position[a], position[b]) for a, b in edges]
    index_edges += [(k, last) for k in range(last)]
    logger.debug("derived %d subgoals for %s", last, ", ".join(literal_name(mdp, l) for l in goal))
    return SubgoalSet(tuple(subgoals), tuple(sorted(index_edges)))


def attach_goal(mdp: GroundMdp, goal: Sequence[GroundLiteral],
                multiplier: Optional[float] = None, **kwargs) -> GroundMdp:
    """``with_goal`` with subgoals derived from the MDP's initial state."""
    return with_goal(mdp, goal, multiplier, subgoals=derive_subgoals(mdp, goal), **kwargs)


def validate_subgoals(subgoals: SubgoalSet, states: Iterable[State]) -> List[str]:
    """Names of subgoals that hold in none of ``states``."""
    pending = {k: sg for k, sg in enumerate(subgoals.subgoals)}
    for st in states:
        for k in [k for k, sg in pending.items() if goal_satisfied(st, sg.literals)]:
            del pending[k]
        if not pending:
            break
    return [sg.name for sg in pending.values()]


def drop_subgoals(subgoals: SubgoalSet, names: Iterable[str]) -> SubgoalSet:
    """``subgoals`` without the named ones; ordering edges are renumbered."""
    names = set(names)
    keep = [k for k, sg in enumerate(subgoals.subgoals) if sg.name not in names]
    position = {k: n for n, k in enumerate(keep)}
    edges = tuple(sorted((position[a], position[b]) for a, b in subgoals.edges
                         if a in position and b in position))
    return SubgoalSet(tuple(subgoals.subgoals[k] for k in keep), edges)


def is_acyclic(subgoals: SubgoalSet) -> bool:
    succ: Dict[int, List[int]] = {}
    for a, b in subgoals.edges:
        succ.setdefault(a, []).append(b)
    state: Dict[int, int] = {}

    def visit(n) -> bool:
        state[n] = 1
        for m in succ.get(n, ()):
            if state.get(m) == 1 or (m not in state and not visit(m)):
                return False
        state[n] = 2
        return True

    return all(visit(n) for n in range(len(subgoals.subgoals)) if n not in state)
