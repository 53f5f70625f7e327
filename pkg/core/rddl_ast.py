"""
Syntax tree of the relational domain language and its pretty printer.

All nodes are frozen dataclasses so parsed specs compare structurally and
can be shared between threads. Source positions are kept out of equality.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple, Union

Position = Optional[Tuple[int, int]]


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class NumConst:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # includes the leading '?'


@dataclass(frozen=True)
class FluentRef:
    name: str
    args: Tuple[str, ...] = ()
    primed: bool = False
    position: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of ^ | => == + - *
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class IfThenElse:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Bernoulli:
    prob: "Expr"


@dataclass(frozen=True)
class Quantifier:
    kind: str  # sum | exists | forall
    bindings: Tuple[Tuple[str, str], ...]  # (?var, type)
    body: "Expr"
    position: Position = field(default=None, compare=False, repr=False)


Expr = Union[BoolConst, NumConst, Var, FluentRef, Not, Neg, BinOp,
             IfThenElse, Bernoulli, Quantifier]


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield every node of an expression, parents first."""
    yield expr
    if isinstance(expr, (Not, Neg)):
        yield from walk(expr.arg)
    elif isinstance(expr, BinOp):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, IfThenElse):
        yield from walk(expr.cond)
        yield from walk(expr.then)
        yield from walk(expr.orelse)
    elif isinstance(expr, Bernoulli):
        yield from walk(expr.prob)
    elif isinstance(expr, Quantifier):
        yield from walk(expr.body)


# ---------------------------------------------------------------- declarations

STATE_FLUENT = "state-fluent"
ACTION_FLUENT = "action-fluent"
NON_FLUENT = "non-fluent"
INTERM_FLUENT = "interm-fluent"


@dataclass(frozen=True)
class PVariable:
    name: str
    params: Tuple[str, ...]
    kind: str
    range: str
    default: Union[bool, float]
    position: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cpf:
    name: str
    params: Tuple[str, ...]
    expr: Expr
    position: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RewardTerm:
    name: str
    weight: Union[float, str]  # literal weight or a 0-arity real non-fluent
    expr: Expr


@dataclass(frozen=True)
class Precondition:
    action: str
    params: Tuple[str, ...]
    expr: Expr


@dataclass(frozen=True)
class ActionCost:
    action: str
    params: Tuple[str, ...]
    expr: Expr


@dataclass(frozen=True)
class DomainSpec:
    name: str
    types: Tuple[str, ...]
    pvariables: Tuple[PVariable, ...]
    cpfs: Tuple[Cpf, ...]
    reward_terms: Tuple[RewardTerm, ...] = ()
    preconditions: Tuple[Precondition, ...] = ()
    action_costs: Tuple[ActionCost, ...] = ()
    default_action_cost: float = 0.0

    def pvariable(self, name: str) -> Optional[PVariable]:
        for pv in self.pvariables:
            if pv.name == name:
                return pv
        return None

    def of_kind(self, kind: str) -> Tuple[PVariable, ...]:
        return tuple(pv for pv in self.pvariables if pv.kind == kind)

    def cpf(self, name: str) -> Optional[Cpf]:
        for c in self.cpfs:
            if c.name == name:
                return c
        return None


Atom = Tuple[str, Tuple[str, ...]]


@dataclass(frozen=True)
class Literal:
    name: str
    args: Tuple[str, ...] = ()
    positive: bool = True
    position: Position = field(default=None, compare=False, repr=False)

    @property
    def atom(self) -> Atom:
        return (self.name, self.args)

    def __str__(self) -> str:
        return ("" if self.positive else "~") + format_atom(self.name, self.args)


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    domain: str
    objects: Tuple[Tuple[str, Tuple[str, ...]], ...]
    non_fluents: Tuple[Tuple[Atom, Union[bool, float]], ...] = ()
    init_state: Tuple[Literal, ...] = ()
    goal: Tuple[Literal, ...] = ()
    horizon: int = 40

    def objects_of(self, type_name: str) -> Tuple[str, ...]:
        for t, names in self.objects:
            if t == type_name:
                return names
        return ()

    def object_types(self) -> Dict[str, Tuple[str, ...]]:
        """Map each object to every type it is declared under."""
        out: Dict[str, Tuple[str, ...]] = {}
        for t, names in self.objects:
            for n in names:
                out[n] = out.get(n, ()) + (t,)
        return out

    def all_objects(self) -> Tuple[str, ...]:
        seen = []
        for _, names in self.objects:
            for n in names:
                if n not in seen:
                    seen.append(n)
        return tuple(seen)


# ---------------------------------------------------------------- printing

_OPS = {"^", "|", "=>", "==", "+", "-", "*"}


def format_atom(name: str, args: Tuple[str, ...]) -> str:
    return f"{name}({', '.join(args)})" if args else name


def _format_number(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def format_expr(expr: Expr) -> str:
    """Render an expression; binary operators are fully parenthesized."""
    if isinstance(expr, BoolConst):
        return "true" if expr.value else "false"
    if isinstance(expr, NumConst):
        return _format_number(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, FluentRef):
        name = expr.name + ("'" if expr.primed else "")
        return format_atom(name, expr.args)
    if isinstance(expr, Not):
        return "~" + format_expr(expr.arg)
    if isinstance(expr, Neg):
        return "-" + format_expr(expr.arg)
    if isinstance(expr, BinOp):
        assert expr.op in _OPS, expr.op
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    if isinstance(expr, IfThenElse):
        return (f"(if ({format_expr(expr.cond)}) then {format_expr(expr.then)} "
                f"else {format_expr(expr.orelse)})")
    if isinstance(expr, Bernoulli):
        return f"Bernoulli({format_expr(expr.prob)})"
    if isinstance(expr, Quantifier):
        binds = ", ".join(f"{v} : {t}" for v, t in expr.bindings)
        return f"{expr.kind}_{{{binds}}}[{format_expr(expr.body)}]"
    raise TypeError(f"not an expression: {expr!r}")


def _format_value(value: Union[bool, float]) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return _format_number(value)


def format_domain(domain: DomainSpec) -> str:
    lines = [f"domain {domain.name} {{", "    types {"]
    lines += [f"        {t} : object;" for t in domain.types]
    lines += ["    };", "    pvariables {"]
    for pv in domain.pvariables:
        lines.append(f"        {format_atom(pv.name, pv.params)} : {{ {pv.kind}, {pv.range}, "
                     f"default = {_format_value(pv.default)} }};")
    lines += ["    };", "    cpfs {"]
    for c in domain.cpfs:
        primed = c.name + "'"
        lines.append(f"        {format_atom(primed, c.params)} = {format_expr(c.expr)};")
    lines += ["    };", "    reward {"]
    for r in domain.reward_terms:
        weight = r.weight if isinstance(r.weight, str) else _format_number(r.weight)
        lines.append(f"        {r.name} ({weight}) : {format_expr(r.expr)};")
    lines += ["    };", "    action-preconditions {"]
    for p in domain.preconditions:
        lines.append(f"        {format_atom(p.action, p.params)} => {format_expr(p.expr)};")
    lines += ["    };", "    action-costs {"]
    for c in domain.action_costs:
        lines.append(f"        {format_atom(c.action, c.params)} = {format_expr(c.expr)};")
    lines.append(f"        default = {_format_number(domain.default_action_cost)};")
    lines += ["    };", "}", ""]
    return "\n".join(lines)


def format_instance(instance: InstanceSpec) -> str:
    lines = [f"instance {instance.name} {{", f"    domain = {instance.domain};", "    objects {"]
    for t, names in instance.objects:
        lines.append(f"        {t} : {{{', '.join(names)}}};")
    lines += ["    };", "    non-fluents {"]
    for (name, args), value in instance.non_fluents:
        if isinstance(value, bool):
            lines.append(f"        {'' if value else '~'}{format_atom(name, args)};")
        else:
            lines.append(f"        {format_atom(name, args)} = {_format_number(value)};")
    lines += ["    };", "    init-state {"]
    lines += [f"        {lit};" for lit in instance.init_state]
    lines += ["    };", "    goal {"]
    lines += [f"        {lit};" for lit in instance.goal]
    lines += ["    };", f"    horizon = {instance.horizon};", "}", ""]
    return "\n".join(lines)
