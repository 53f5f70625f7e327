"""
Grounding of a parsed domain + instance into a GroundMdp.

Fluents and actions are enumerated lexicographically by schema name and then
argument tuple, so identical inputs always give identical indices.
"""

import itertools
import logging
from typing import Dict, List, Optional, Tuple

from .errors import CombinatorialLimitExceeded, RddlTypeError
from .ground_expr import (FALSE, TRUE, GAction, GConst, GFluent, GInterm, GNode, actions_in,
                          mk_bern, mk_bin, mk_ite, mk_nary, mk_neg, mk_not, substitute)
from .mdp import (ANTICIPATORY, HUMAN, ROBOT, GroundAction, GroundMdp, RewardInstance,
                  RewardSpec, State)
from .rddl_ast import (ACTION_FLUENT, INTERM_FLUENT, NON_FLUENT, STATE_FLUENT, Bernoulli,
                       BinOp, BoolConst, DomainSpec, Expr, FluentRef, IfThenElse, InstanceSpec,
                       Neg, Not, NumConst, PVariable, Quantifier, Var)

logger = logging.getLogger(__name__)

DEFAULT_LIMIT = 100_000

# Weight non-fluents the goal machinery reads when a domain declares them
GOAL_WEIGHT_FLUENTS = {"goal": "W_goal", "subgoal": "W_subgoal", "delivery": "W_delivery"}


def ground_name(name: str, args: Tuple[str, ...]) -> str:
    return f"{name}({','.join(args)})" if args else name


def reward_category(term_name: str) -> str:
    for category in ANTICIPATORY:
        if term_name.startswith(category.split("_")[0]):
            return category
    return "shaping"


class _Grounder:
    """Holds the lookup tables needed while grounding one instance."""

    def __init__(self, domain: DomainSpec, instance: InstanceSpec):
        self.domain = domain
        self.instance = instance
        self.objects: Dict[str, Tuple[str, ...]] = {
            t: tuple(sorted(instance.objects_of(t))) for t in domain.types
        }
        self.nf_values: Dict[Tuple[str, Tuple[str, ...]], float] = {
            atom: float(value) for atom, value in instance.non_fluents
        }
        self.fluent_index: Dict[Tuple[str, Tuple[str, ...]], int] = {}
        self.live_actions: Optional[set] = None

    def tuples(self, params: Tuple[str, ...]):
        return itertools.product(*(self.objects.get(t, ()) for t in params))

    def count(self, pv: PVariable) -> int:
        total = 1
        for t in pv.params:
            total *= len(self.objects.get(t, ()))
        return total

    def non_fluent(self, name: str, args: Tuple[str, ...]) -> float:
        if (name, args) in self.nf_values:
            return self.nf_values[(name, args)]
        pv = self.domain.pvariable(name)
        return float(pv.default) if pv is not None else 0.0

    # -- expressions
    def expr(self, expr: Expr, env: Dict[str, str]) -> GNode:
        if isinstance(expr, BoolConst):
            return TRUE if expr.value else FALSE
        if isinstance(expr, NumConst):
            return GConst(float(expr.value))
        if isinstance(expr, FluentRef):
            return self.fluent(expr, env)
        if isinstance(expr, Not):
            return mk_not(self.expr(expr.arg, env))
        if isinstance(expr, Neg):
            return mk_neg(self.expr(expr.arg, env))
        if isinstance(expr, BinOp):
            left = self.expr(expr.left, env)
            if isinstance(left, GConst):
                # skip the right side when the left one already decides
                if expr.op in ("^", "*") and left.value == 0.0:
                    return FALSE
                if expr.op == "|" and left.value == 1.0:
                    return TRUE
                if expr.op == "=>" and left.value == 0.0:
                    return TRUE
            return mk_bin(expr.op, left, self.expr(expr.right, env))
        if isinstance(expr, IfThenElse):
            cond = self.expr(expr.cond, env)
            if isinstance(cond, GConst) and cond.value in (0.0, 1.0):
                return self.expr(expr.then if cond.value else expr.orelse, env)
            return mk_ite(cond, self.expr(expr.then, env), self.expr(expr.orelse, env))
        if isinstance(expr, Bernoulli):
            return mk_bern(self.expr(expr.prob, env))
        if isinstance(expr, Quantifier):
            op = {"sum": "+", "exists": "|", "forall": "^"}[expr.kind]
            decisive = {"|": TRUE, "^": FALSE}.get(op)
            parts = []
            for inner in self.bindings(expr.bindings, env):
                node = self.expr(expr.body, inner)
                if node == decisive:
                    return decisive
                parts.append(node)
            return mk_nary(op, parts)
        if isinstance(expr, Var):
            raise RddlTypeError(f"bare variable '{expr.name}' used as a value")
        raise TypeError(f"cannot ground {expr!r}")

    def bindings(self, bindings, env):
        names = [v for v, _ in bindings]
        for combo in itertools.product(*(self.objects.get(t, ()) for _, t in bindings)):
            inner = dict(env)
            inner.update(zip(names, combo))
            yield inner

    def fluent(self, ref: FluentRef, env: Dict[str, str]) -> GNode:
        args = tuple(env[a] if a.startswith("?") else a for a in ref.args)
        pv = self.domain.pvariable(ref.name)
        if pv.kind == NON_FLUENT:
            return GConst(self.non_fluent(ref.name, args))
        if pv.kind == INTERM_FLUENT:
            return GInterm()
        if pv.kind == ACTION_FLUENT:
            name = ground_name(ref.name, args)
            if self.live_actions is not None and name not in self.live_actions:
                return FALSE
            return GAction(name)
        index = self.fluent_index.get((ref.name, args))
        if index is None:
            return FALSE
        return GFluent(index, ref.primed)


def _agent_of(pv: PVariable) -> str:
    return HUMAN if pv.params and pv.params[0] == HUMAN else ROBOT


def ground(domain: DomainSpec, instance: InstanceSpec, limit: int = DEFAULT_LIMIT,
           prune_static: bool = True) -> GroundMdp:
    """
    Ground ``instance`` against ``domain``.

    Args:
        domain: Parsed domain
        instance: Parsed instance of that domain
        limit: Cap on the number of ground state fluents
        prune_static: Drop actions whose precondition folds to false on non-fluents alone

    Returns:
        GroundMdp with the instance goal attached as the goal literals (no goal
        reward terms yet; see ``mdp.with_goal``)
    """
    g = _Grounder(domain, instance)
    state_pvs = sorted(domain.of_kind(STATE_FLUENT), key=lambda pv: pv.name)
    action_pvs = sorted(domain.of_kind(ACTION_FLUENT), key=lambda pv: pv.name)

    n_fluents = sum(g.count(pv) for pv in state_pvs)
    if n_fluents > limit:
        raise CombinatorialLimitExceeded(
            f"instance '{instance.name}' grounds to {n_fluents} fluents (limit {limit})")

    fluents: List[str] = []
    atoms: List[Tuple[str, Tuple[str, ...]]] = []
    for pv in state_pvs:
        for args in g.tuples(pv.params):
            g.fluent_index[(pv.name, args)] = len(fluents)
            fluents.append(ground_name(pv.name, args))
            atoms.append((pv.name, args))

    # preconditions first so pruned actions vanish from cpfs and rewards
    robot_actions: List[GroundAction] = []
    human_actions: List[GroundAction] = []
    for pv in action_pvs:
        pres = [p for p in domain.preconditions if p.action == pv.name]
        costs = [c for c in domain.action_costs if c.action == pv.name]
        agent = _agent_of(pv)
        item_pos = pv.params.index("item") if "item" in pv.params else None
        for args in g.tuples(pv.params):
            name = ground_name(pv.name, args)
            pre = mk_nary("^", (g.expr(p.expr, dict(zip(p.params, args))) for p in pres))
            if prune_static and pre == FALSE:
                continue
            if agent == ROBOT:
                cost = (mk_nary("+", (g.expr(c.expr, dict(zip(c.params, args))) for c in costs))
                        if costs else GConst(domain.default_action_cost))
            else:
                cost = GConst(0.0)
            act = GroundAction(name, pv.name, args, agent, pre, cost,
                               args[item_pos] if item_pos is not None else None, pv.params)
            (robot_actions if agent == ROBOT else human_actions).append(act)
    g.live_actions = {a.name for a in robot_actions + human_actions}

    transition: List[GNode] = []
    affected: Dict[str, set] = {}
    passive: List[int] = []
    for pv in state_pvs:
        cpf = domain.cpf(pv.name)
        for args in g.tuples(pv.params):
            index = g.fluent_index[(pv.name, args)]
            node = g.expr(cpf.expr, dict(zip(cpf.params, args)))
            transition.append(node)
            for act in actions_in(node):
                affected.setdefault(act, set()).add(index)
            idle = substitute(node, action_value=lambda _n: 0.0, interm=1.0)
            if idle != GFluent(index):
                passive.append(index)

    weights = {key: g.non_fluent(nf, ()) for key, nf in GOAL_WEIGHT_FLUENTS.items()
               if domain.pvariable(nf) is not None}

    bits = 0
    for pv in state_pvs:
        if pv.default is True:
            for args in g.tuples(pv.params):
                bits |= 1 << g.fluent_index[(pv.name, args)]
    for lit in instance.init_state:
        i = g.fluent_index[lit.atom]
        bits = bits | (1 << i) if lit.positive else bits & ~(1 << i)

    goal = tuple((g.fluent_index[lit.atom], lit.positive) for lit in instance.goal)
    reward = RewardSpec(goal=goal, goal_weight=weights.get("goal", 100.0),
                        **_ground_rewards(g, domain))

    mdp = GroundMdp(
        name=instance.name,
        fluents=tuple(fluents),
        fluent_atoms=tuple(atoms),
        robot_actions=tuple(robot_actions),
        human_actions=tuple(human_actions),
        transition=tuple(transition),
        reward=reward,
        horizon=instance.horizon,
        initial_state=State(bits, 0),
        objects=dict(g.objects),
        non_fluents=dict(g.nf_values),
        affected_by={k: tuple(sorted(v)) for k, v in affected.items()},
        passive=tuple(passive),
        weights=weights,
    )
    logger.debug("grounded %s: %d fluents, %d robot / %d human actions, %d passive",
                 instance.name, len(fluents), len(robot_actions), len(human_actions),
                 len(passive))
    return mdp


def _ground_rewards(g: _Grounder, domain: DomainSpec) -> Dict[str, Tuple[RewardInstance, ...]]:
    buckets: Dict[str, List[RewardInstance]] = {
        "shaping_terms": [], "r1_prevent": [], "r2_prepare": [], "r3_penalty": []}
    for term in domain.reward_terms:
        weight = (g.non_fluent(term.weight, ()) if isinstance(term.weight, str)
                  else float(term.weight))
        category = reward_category(term.name)
        bucket = buckets["shaping_terms" if category == "shaping" else category]
        expr = term.expr
        if isinstance(expr, Quantifier) and expr.kind == "sum":
            for env in g.bindings(expr.bindings, {}):
                node = g.expr(expr.body, env)
                if node == FALSE:
                    continue
                objs = tuple(env[v] for v, _ in expr.bindings)
                key = f"{term.name}[{','.join(objs)}]"
                bucket.append(RewardInstance(key, category, weight, node, objs))
        else:
            node = g.expr(expr, {})
            if node != FALSE:
                bucket.append(RewardInstance(term.name, category, weight, node, ()))
    return {k: tuple(v) for k, v in buckets.items()}
