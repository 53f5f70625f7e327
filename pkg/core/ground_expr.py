"""
Ground expression trees: constant folding, specialization and compilation.

Every value is a float. Booleans are 0.0/1.0 and logical operators use the
independent-probability forms (a*b, a+b-ab, 1-a), so a cpf evaluates to the
probability that its fluent is true next step.
"""

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, Optional, Set, Tuple


class GNode:
    __slots__ = ()


@dataclass(frozen=True)
class GConst(GNode):
    value: float


@dataclass(frozen=True)
class GFluent(GNode):
    index: int
    primed: bool = False


@dataclass(frozen=True)
class GAction(GNode):
    name: str


@dataclass(frozen=True)
class GInterm(GNode):
    """The per-step human outcome (1.0 success, 0.0 failure)."""


@dataclass(frozen=True)
class GNot(GNode):
    arg: GNode


@dataclass(frozen=True)
class GNeg(GNode):
    arg: GNode


@dataclass(frozen=True)
class GNary(GNode):
    op: str  # ^ | +
    args: Tuple[GNode, ...]


@dataclass(frozen=True)
class GBin(GNode):
    op: str  # => == - *
    left: GNode
    right: GNode


@dataclass(frozen=True)
class GIte(GNode):
    cond: GNode
    then: GNode
    orelse: GNode


@dataclass(frozen=True)
class GBern(GNode):
    prob: GNode


TRUE = GConst(1.0)
FALSE = GConst(0.0)


# ---------------------------------------------------------------- builders (fold as they go)

def mk_not(a: GNode) -> GNode:
    if isinstance(a, GConst):
        return GConst(1.0 - a.value)
    if isinstance(a, GNot):
        return a.arg
    return GNot(a)


def mk_neg(a: GNode) -> GNode:
    if isinstance(a, GConst):
        return GConst(-a.value)
    return GNeg(a)


def mk_nary(op: str, args: Iterable[GNode]) -> GNode:
    identity = {"^": 1.0, "|": 0.0, "+": 0.0}[op]
    flat = []
    const = identity
    for a in args:
        parts = a.args if isinstance(a, GNary) and a.op == op else (a,)
        for p in parts:
            if isinstance(p, GConst):
                if op == "^":
                    const *= p.value
                elif op == "|":
                    const = const + p.value - const * p.value
                else:
                    const += p.value
            else:
                flat.append(p)
    if op == "^" and const == 0.0:
        return FALSE
    if op == "|" and const == 1.0:
        return TRUE
    if const != identity:
        flat.append(GConst(const))
    if not flat:
        return GConst(identity)
    if len(flat) == 1:
        return flat[0]
    return GNary(op, tuple(flat))


def mk_bin(op: str, a: GNode, b: GNode) -> GNode:
    if op == "^":
        return mk_nary("^", (a, b))
    if op == "|":
        return mk_nary("|", (a, b))
    if op == "+":
        return mk_nary("+", (a, b))
    ca = a.value if isinstance(a, GConst) else None
    cb = b.value if isinstance(b, GConst) else None
    if ca is not None and cb is not None:
        return GConst(_apply(op, ca, cb))
    if op == "=>":
        if ca == 0.0 or cb == 1.0:
            return TRUE
        if ca == 1.0:
            return b
        if cb == 0.0:
            return mk_not(a)
    elif op == "*":
        if ca == 0.0 or cb == 0.0:
            return FALSE
        if ca == 1.0:
            return b
        if cb == 1.0:
            return a
    elif op == "-" and cb == 0.0:
        return a
    return GBin(op, a, b)


def mk_ite(c: GNode, t: GNode, e: GNode) -> GNode:
    if isinstance(c, GConst):
        if c.value == 1.0:
            return t
        if c.value == 0.0:
            return e
    if t == e:
        return t
    if t == TRUE and e == FALSE:
        return c
    return GIte(c, t, e)


def mk_bern(p: GNode) -> GNode:
    if isinstance(p, GConst):
        return GConst(min(1.0, max(0.0, p.value)))
    return GBern(p)


def _apply(op: str, a: float, b: float) -> float:
    if op == "=>":
        return 1.0 - a + a * b
    if op == "==":
        return 1.0 if a == b else 0.0
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    raise ValueError(op)


# ---------------------------------------------------------------- traversal

def children(node: GNode) -> Tuple[GNode, ...]:
    if isinstance(node, (GNot, GNeg)):
        return (node.arg,)
    if isinstance(node, GNary):
        return node.args
    if isinstance(node, GBin):
        return (node.left, node.right)
    if isinstance(node, GIte):
        return (node.cond, node.then, node.orelse)
    if isinstance(node, GBern):
        return (node.prob,)
    return ()


def actions_in(node: GNode) -> FrozenSet[str]:
    found: Set[str] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, GAction):
            found.add(n.name)
        stack.extend(children(n))
    return frozenset(found)


def fluents_in(node: GNode, primed: Optional[bool] = None) -> FrozenSet[int]:
    found: Set[int] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, GFluent) and (primed is None or n.primed == primed):
            found.add(n.index)
        stack.extend(children(n))
    return frozenset(found)


def substitute(node: GNode,
               action_value: Optional[Callable[[str], Optional[float]]] = None,
               interm: Optional[float] = None,
               fluents: Optional[Dict[int, float]] = None) -> GNode:
    """Replace actions/outcome/fluents by constants and refold."""
    if isinstance(node, GAction):
        if action_value is not None:
            v = action_value(node.name)
            if v is not None:
                return GConst(v)
        return node
    if isinstance(node, GInterm):
        return GConst(interm) if interm is not None else node
    if isinstance(node, GFluent):
        if fluents is not None and not node.primed and node.index in fluents:
            return GConst(fluents[node.index])
        return node
    if isinstance(node, GConst):
        return node
    sub = [substitute(c, action_value, interm, fluents) for c in children(node)]
    if isinstance(node, GNot):
        return mk_not(sub[0])
    if isinstance(node, GNeg):
        return mk_neg(sub[0])
    if isinstance(node, GNary):
        return mk_nary(node.op, sub)
    if isinstance(node, GBin):
        return mk_bin(node.op, sub[0], sub[1])
    if isinstance(node, GIte):
        return mk_ite(*sub)
    if isinstance(node, GBern):
        return mk_bern(sub[0])
    raise TypeError(node)


# ---------------------------------------------------------------- relaxed analysis

LiteralSet = FrozenSet[Tuple[int, bool]]


def necessary_literals(node: GNode, positive: bool = True) -> Optional[LiteralSet]:
    """
    Fluent literals that must hold for ``node`` to be true (or false when
    ``positive`` is False). Returns None when that is impossible.
    Arithmetic, outcome and Bernoulli parts contribute nothing.
    """
    if isinstance(node, GConst):
        truthy = node.value > 0.0
        return frozenset() if truthy == positive else None
    if isinstance(node, GFluent):
        return frozenset() if node.primed else frozenset({(node.index, positive)})
    if isinstance(node, GNot):
        return necessary_literals(node.arg, not positive)
    if isinstance(node, GNary) and node.op in ("^", "|"):
        conjunctive = (node.op == "^") == positive
        parts = [necessary_literals(a, positive) for a in node.args]
        if conjunctive:
            return _union(parts)
        return _intersection(parts)
    if isinstance(node, GBin) and node.op == "=>":
        return necessary_literals(mk_nary("|", (mk_not(node.left), node.right)), positive)
    if isinstance(node, GIte):
        then_side = _union([necessary_literals(node.cond, True),
                            necessary_literals(node.then, positive)])
        else_side = _union([necessary_literals(node.cond, False),
                            necessary_literals(node.orelse, positive)])
        return _intersection([then_side, else_side])
    return frozenset()


def _union(parts) -> Optional[LiteralSet]:
    out: Set[Tuple[int, bool]] = set()
    for p in parts:
        if p is None:
            return None
        out |= p
    if any((i, not v) in out for i, v in out):
        return None
    return frozenset(out)


def _intersection(parts) -> Optional[LiteralSet]:
    live = [p for p in parts if p is not None]
    if not live:
        return None
    out = set(live[0])
    for p in live[1:]:
        out &= p
    return frozenset(out)


# ---------------------------------------------------------------- compilation

Compiled = Callable[[int, int, str, str, float], float]


def compile_node(node: GNode) -> Compiled:
    """Compile to ``f(state_bits, next_bits, robot_action, human_action, outcome)``."""
    if isinstance(node, GConst):
        value = node.value
        return lambda s, sn, r, h, ok: value
    if isinstance(node, GFluent):
        i = node.index
        if node.primed:
            return lambda s, sn, r, h, ok: 1.0 if (sn >> i) & 1 else 0.0
        return lambda s, sn, r, h, ok: 1.0 if (s >> i) & 1 else 0.0
    if isinstance(node, GAction):
        name = node.name
        return lambda s, sn, r, h, ok: 1.0 if (r == name or h == name) else 0.0
    if isinstance(node, GInterm):
        return lambda s, sn, r, h, ok: ok
    if isinstance(node, GNot):
        f = compile_node(node.arg)
        return lambda s, sn, r, h, ok: 1.0 - f(s, sn, r, h, ok)
    if isinstance(node, GNeg):
        f = compile_node(node.arg)
        return lambda s, sn, r, h, ok: -f(s, sn, r, h, ok)
    if isinstance(node, GNary):
        if node.op == "^":
            return _compile_conjunction(node.args)
        fs = tuple(compile_node(a) for a in node.args)
        if node.op == "|":
            def disj(s, sn, r, h, ok):
                miss = 1.0
                for f in fs:
                    miss *= 1.0 - f(s, sn, r, h, ok)
                    if miss == 0.0:
                        return 1.0
                return 1.0 - miss
            return disj

        def total(s, sn, r, h, ok):
            return sum(f(s, sn, r, h, ok) for f in fs)
        return total
    if isinstance(node, GBin):
        fa, fb, op = compile_node(node.left), compile_node(node.right), node.op
        if op == "=>":
            def imply(s, sn, r, h, ok):
                a = fa(s, sn, r, h, ok)
                return 1.0 if a == 0.0 else 1.0 - a + a * fb(s, sn, r, h, ok)
            return imply
        return lambda s, sn, r, h, ok: _apply(op, fa(s, sn, r, h, ok), fb(s, sn, r, h, ok))
    if isinstance(node, GIte):
        fc, ft, fe = compile_node(node.cond), compile_node(node.then), compile_node(node.orelse)

        def ite(s, sn, r, h, ok):
            c = fc(s, sn, r, h, ok)
            if c == 1.0:
                return ft(s, sn, r, h, ok)
            if c == 0.0:
                return fe(s, sn, r, h, ok)
            return c * ft(s, sn, r, h, ok) + (1.0 - c) * fe(s, sn, r, h, ok)
        return ite
    if isinstance(node, GBern):
        f = compile_node(node.prob)
        return lambda s, sn, r, h, ok: min(1.0, max(0.0, f(s, sn, r, h, ok)))
    raise TypeError(f"cannot compile {node!r}")


def _compile_conjunction(args: Tuple[GNode, ...]) -> Compiled:
    """Fluent and action literals become bitmask tests; the rest multiply in order."""
    masks = [0, 0, 0, 0]  # state true, state false, next true, next false
    names = []
    rest = []
    for a in args:
        positive = not isinstance(a, GNot)
        inner = a if positive else a.arg
        if isinstance(inner, GFluent):
            masks[(2 if inner.primed else 0) + (0 if positive else 1)] |= 1 << inner.index
        elif isinstance(inner, GAction) and positive:
            names.append(inner.name)
        else:
            rest.append(compile_node(a))
    pos_s, neg_s, pos_n, neg_n = masks
    names = tuple(names)
    fs = tuple(rest)

    def conj(s, sn, r, h, ok):
        if (s & pos_s) != pos_s or s & neg_s or (sn & pos_n) != pos_n or sn & neg_n:
            return 0.0
        for name in names:
            if r != name and h != name:
                return 0.0
        acc = 1.0
        for f in fs:
            acc *= f(s, sn, r, h, ok)
            if acc == 0.0:
                return 0.0
        return acc
    return conj


# ---------------------------------------------------------------- reward triggers

def change_trigger(node: GNode) -> Optional[FrozenSet[int]]:
    """
    Fluents of which at least one must change between the current and the
    next state for ``node`` to be non-zero, or None when no such set is known.
    """
    if isinstance(node, GNary) and node.op == "^":
        found = []
        primed_pos = {a.index for a in node.args if isinstance(a, GFluent) and a.primed}
        primed_neg = {a.arg.index for a in node.args
                      if isinstance(a, GNot) and isinstance(a.arg, GFluent) and a.arg.primed}
        for a in node.args:
            if isinstance(a, GNot) and isinstance(a.arg, GFluent) and not a.arg.primed \
                    and a.arg.index in primed_pos:
                found.append(frozenset({a.arg.index}))
            elif isinstance(a, GFluent) and not a.primed and a.index in primed_neg:
                found.append(frozenset({a.index}))
            elif isinstance(a, GNot) and isinstance(a.arg, GNary) and a.arg.op == "^":
                # next-state conjunction that did not hold before
                held = [_current_literal(b) for b in a.arg.args]
                if held and all(lit is not None and
                                (lit[0] in (primed_pos if lit[1] else primed_neg)) for lit in held):
                    found.append(frozenset(i for i, _ in held))
            else:
                sub = change_trigger(a)
                if sub is not None:
                    found.append(sub)
        return min(found, key=lambda t: (len(t), sorted(t))) if found else None
    if isinstance(node, GNary) and node.op in ("|", "+"):
        parts = [change_trigger(a) for a in node.args]
        if any(p is None for p in parts):
            return None
        return frozenset().union(*parts)
    return None


def _current_literal(node: GNode) -> Optional[Tuple[int, bool]]:
    if isinstance(node, GFluent) and not node.primed:
        return node.index, True
    if isinstance(node, GNot) and isinstance(node.arg, GFluent) and not node.arg.primed:
        return node.arg.index, False
    return None


def action_trigger(node: GNode) -> Optional[FrozenSet[str]]:
    """Ground actions of which one must be taken for ``node`` to be non-zero, or None."""
    if isinstance(node, GAction):
        return frozenset({node.name})
    if isinstance(node, GNary) and node.op == "^":
        found = [t for t in (action_trigger(a) for a in node.args) if t is not None]
        return min(found, key=lambda t: (len(t), sorted(t))) if found else None
    if isinstance(node, GNary) and node.op in ("|", "+"):
        parts = [action_trigger(a) for a in node.args]
        if any(p is None for p in parts):
            return None
        return frozenset().union(*parts)
    return None
