"""
RDDL-lite - parser and checker for domain and instance files

The grammar lives next to this module in ``rddl.lark``. Parsing never
aborts the process: ``parse_domain``/``parse_instance`` raise a subclass of
``RddlError`` carrying positioned diagnostics, and ``check_domain`` /
``check_instance`` return ``(spec_or_None, diagnostics)`` instead.
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Type

from lark import Lark
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput
from lark.visitors import Transformer, v_args

from .errors import (Diagnostic, DuplicateDeclaration, EmptyGoal, GoalUsesActionFluent,
                     RddlError, RddlSyntaxError, RddlTypeError, UnknownObject)
from .rddl_ast import (ACTION_FLUENT, INTERM_FLUENT, NON_FLUENT, STATE_FLUENT, ActionCost,
                       Bernoulli, BinOp, BoolConst, Cpf, DomainSpec, Expr, FluentRef,
                       IfThenElse, InstanceSpec, Literal, Neg, Not, NumConst, Precondition,
                       PVariable, Quantifier, RewardTerm, Var, format_atom)
from .grounding import ground  # noqa: F401  (re-exported)

logger = logging.getLogger(__name__)
inline_args = v_args(inline=True)

GRAMMAR_PATH = Path(__file__).with_name("rddl.lark")


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(GRAMMAR_PATH.read_text(encoding="utf-8"),
                start=["domain_file", "instance_file"],
                parser="lalr",
                lexer="contextual",
                propagate_positions=True,
                maybe_placeholders=False)


def _pos(meta) -> Optional[Tuple[int, int]]:
    if getattr(meta, "empty", True):
        return None
    return (meta.line, meta.column)


class _SpecBuilder(Transformer):
    """Turns a lark parse tree into rddl_ast values (no validation here)."""

    def __init__(self):
        super().__init__()
        self.atom_positions: Dict[Tuple[str, Tuple[str, ...]], Tuple[int, int]] = {}

    # -- expressions
    @inline_args
    def ite(self, cond, then, orelse):
        return IfThenElse(cond, then, orelse)

    @inline_args
    def imply(self, a, b):
        return BinOp("=>", a, b)

    @inline_args
    def or_(self, a, b):
        return BinOp("|", a, b)

    @inline_args
    def and_(self, a, b):
        return BinOp("^", a, b)

    @inline_args
    def eq(self, a, b):
        return BinOp("==", a, b)

    @inline_args
    def add(self, a, b):
        return BinOp("+", a, b)

    @inline_args
    def sub(self, a, b):
        return BinOp("-", a, b)

    @inline_args
    def mul(self, a, b):
        return BinOp("*", a, b)

    @inline_args
    def not_(self, a):
        return Not(a)

    @inline_args
    def neg(self, a):
        return Neg(a)

    def true(self, _children):
        return BoolConst(True)

    def false(self, _children):
        return BoolConst(False)

    @inline_args
    def number(self, tok):
        return NumConst(float(tok))

    @inline_args
    def var(self, tok):
        return Var(str(tok))

    @v_args(meta=True)
    def fluent(self, meta, children):
        args = children[1] if len(children) > 1 else ()
        return FluentRef(str(children[0]), args, False, _pos(meta))

    @v_args(meta=True)
    def primed(self, meta, children):
        args = children[1] if len(children) > 1 else ()
        return FluentRef(str(children[0])[:-1], args, True, _pos(meta))

    def arguments(self, children):
        return tuple(str(c) for c in children)

    @inline_args
    def bernoulli(self, prob):
        return Bernoulli(prob)

    @v_args(meta=True)
    def quantifier(self, meta, children):
        tok, bindings, body = children
        return Quantifier(str(tok)[:-2], bindings, body, _pos(meta))

    def bindings(self, children):
        return tuple(children)

    @inline_args
    def binding(self, var, type_name):
        return (str(var), str(type_name))

    # -- domain declarations
    @inline_args
    def type_decl(self, name):
        return str(name)

    def types_section(self, children):
        return ("types", tuple(children))

    def type_list(self, children):
        return tuple(str(c) for c in children)

    def var_list(self, children):
        return tuple(str(c) for c in children)

    def pv_kind(self, children):
        return str(children[0])

    def pv_range(self, children):
        return str(children[0])

    @inline_args
    def number_const(self, tok):
        return float(tok)

    def true_const(self, _children):
        return True

    def false_const(self, _children):
        return False

    @v_args(meta=True)
    def pvar_decl(self, meta, children):
        name = str(children[0])
        params: Tuple[str, ...] = ()
        rest = children[1:]
        if isinstance(rest[0], tuple):
            params, rest = rest[0], rest[1:]
        kind, rng, default = rest
        if rng == "bool" and not isinstance(default, bool):
            default = bool(default)
        return PVariable(name, params, kind, rng, default, _pos(meta))

    def pvariables_section(self, children):
        return ("pvariables", tuple(children))

    @v_args(meta=True)
    def cpf_decl(self, meta, children):
        name = str(children[0])[:-1]
        params = children[1] if len(children) == 3 else ()
        return Cpf(name, params, children[-1], _pos(meta))

    def cpfs_section(self, children):
        return ("cpfs", tuple(children))

    @inline_args
    def number_weight(self, tok):
        return float(tok)

    @inline_args
    def named_weight(self, tok):
        return str(tok)

    @inline_args
    def reward_term(self, name, weight, expr):
        return RewardTerm(str(name), weight, expr)

    def reward_section(self, children):
        return ("reward", tuple(children))

    def precondition(self, children):
        params = children[1] if len(children) == 3 else ()
        return Precondition(str(children[0]), params, children[-1])

    def preconditions_section(self, children):
        return ("preconditions", tuple(children))

    def cost_decl(self, children):
        params = children[1] if len(children) == 3 else ()
        return ActionCost(str(children[0]), params, children[-1])

    @inline_args
    def default_cost(self, tok):
        return float(tok)

    def costs_section(self, children):
        return ("costs", tuple(children))

    def domain_file(self, children):
        sections: Dict[str, list] = {"types": [], "pvariables": [], "cpfs": [], "reward": [],
                                     "preconditions": [], "costs": []}
        for key, items in children[1:]:
            sections[key].extend(items)
        costs = [c for c in sections["costs"] if isinstance(c, ActionCost)]
        defaults = [c for c in sections["costs"] if not isinstance(c, ActionCost)]
        return DomainSpec(name=str(children[0]),
                          types=tuple(sections["types"]),
                          pvariables=tuple(sections["pvariables"]),
                          cpfs=tuple(sections["cpfs"]),
                          reward_terms=tuple(sections["reward"]),
                          preconditions=tuple(sections["preconditions"]),
                          action_costs=tuple(costs),
                          default_action_cost=defaults[-1] if defaults else 0.0)

    # -- instance declarations
    @v_args(meta=True)
    def ground_atom(self, meta, children):
        atom = (str(children[0]), tuple(str(c) for c in children[1:]))
        pos = _pos(meta)
        if pos is not None:
            self.atom_positions.setdefault(atom, pos)
        return atom, pos

    @inline_args
    def positive_literal(self, atom):
        (name, args), pos = atom
        return Literal(name, args, True, pos)

    @inline_args
    def negative_literal(self, atom):
        (name, args), pos = atom
        return Literal(name, args, False, pos)

    @inline_args
    def instance_domain(self, name):
        return ("domain", str(name))

    def object_decl(self, children):
        return (str(children[0]), tuple(str(c) for c in children[1:]))

    def objects_section(self, children):
        return ("objects", tuple(children))

    @inline_args
    def nf_value(self, atom, tok):
        return (atom[0], float(tok))

    @inline_args
    def nf_literal(self, lit):
        return (lit.atom, lit.positive)

    def non_fluents_section(self, children):
        return ("non_fluents", tuple(children))

    def init_section(self, children):
        return ("init", tuple(children))

    def goal_section(self, children):
        return ("goal", tuple(children))

    @inline_args
    def horizon_decl(self, tok):
        return ("horizon", int(tok))

    def instance_file(self, children):
        fields = {"domain": "", "objects": (), "non_fluents": (), "init": (), "goal": (),
                  "horizon": 40}
        for key, value in children[1:]:
            if key in ("objects", "non_fluents", "init", "goal"):
                fields[key] = fields[key] + value
            else:
                fields[key] = value
        return InstanceSpec(name=str(children[0]), domain=fields["domain"],
                            objects=fields["objects"], non_fluents=fields["non_fluents"],
                            init_state=fields["init"], goal=fields["goal"],
                            horizon=fields["horizon"])


# ---------------------------------------------------------------- syntax

def _syntax_error(exc: UnexpectedInput, filename: str) -> RddlSyntaxError:
    line = getattr(exc, "line", 0) or 0
    column = getattr(exc, "column", 0) or 0
    if isinstance(exc, UnexpectedCharacters):
        expected = sorted(exc.allowed or ())
        found = repr(exc.char)
    elif isinstance(exc, UnexpectedEOF):
        expected = sorted(exc.expected or ())
        found = "end of input"
    else:
        expected = sorted(getattr(exc, "expected", None) or ())
        token = getattr(exc, "token", None)
        found = repr(str(token)) if token is not None else "input"
    message = f"unexpected {found}"
    if expected:
        message += f"; expected one of: {', '.join(expected)}"
    diag = Diagnostic(message, line, column, "error", filename)
    return RddlSyntaxError(message, [diag], expected)


def _parse(text: str, start: str, filename: str, builder: _SpecBuilder):
    try:
        tree = _parser().parse(text, start=start)
    except UnexpectedInput as exc:
        raise _syntax_error(exc, filename) from None
    return builder.transform(tree)


# ---------------------------------------------------------------- checking

class _Problems:
    """Collects diagnostics; the first problem decides the exception class."""

    def __init__(self, filename: str):
        self.filename = filename
        self.items: List[Tuple[Type[RddlError], Diagnostic]] = []

    def add(self, cls: Type[RddlError], message: str, pos=None):
        line, col = pos if pos else (0, 0)
        self.items.append((cls, Diagnostic(message, line, col, "error", self.filename)))

    def raise_if_any(self):
        if not self.items:
            return
        cls, first = self.items[0]
        raise cls(first.message, [d for _, d in self.items])


def _check_expr(expr: Expr, domain: DomainSpec, scope: Dict[str, str], problems: _Problems,
                allow_primed: bool, fallback_pos=None):
    if isinstance(expr, FluentRef):
        pos = expr.position or fallback_pos
        pv = domain.pvariable(expr.name)
        if pv is None:
            problems.add(RddlTypeError, f"undeclared fluent '{expr.name}'", pos)
            return
        if len(expr.args) != len(pv.params):
            problems.add(RddlTypeError, f"fluent '{expr.name}' expects {len(pv.params)} "
                                        f"argument(s), got {len(expr.args)}", pos)
        if expr.primed and not allow_primed:
            problems.add(RddlTypeError, f"primed fluent '{expr.name}' outside reward", pos)
        if expr.primed and pv.kind != STATE_FLUENT:
            problems.add(RddlTypeError, f"only state fluents can be primed: '{expr.name}'", pos)
        for arg, expected in zip(expr.args, pv.params):
            if arg.startswith("?"):
                if arg not in scope:
                    problems.add(RddlTypeError, f"unbound variable '{arg}' in '{expr.name}'", pos)
                elif scope[arg] != expected:
                    problems.add(RddlTypeError, f"variable '{arg}' has type '{scope[arg]}' but "
                                                f"'{expr.name}' expects '{expected}'", pos)
        return
    if isinstance(expr, Var):
        problems.add(RddlTypeError, f"bare variable '{expr.name}' used as a value", fallback_pos)
        return
    if isinstance(expr, Quantifier):
        inner = dict(scope)
        for var, type_name in expr.bindings:
            if type_name not in domain.types:
                problems.add(RddlTypeError, f"quantifier binds '{var}' to undeclared type "
                                            f"'{type_name}'", expr.position or fallback_pos)
            inner[var] = type_name
        _check_expr(expr.body, domain, inner, problems, allow_primed, expr.position or fallback_pos)
        return
    if isinstance(expr, (Not, Neg)):
        _check_expr(expr.arg, domain, scope, problems, allow_primed, fallback_pos)
    elif isinstance(expr, BinOp):
        _check_expr(expr.left, domain, scope, problems, allow_primed, fallback_pos)
        _check_expr(expr.right, domain, scope, problems, allow_primed, fallback_pos)
    elif isinstance(expr, IfThenElse):
        for part in (expr.cond, expr.then, expr.orelse):
            _check_expr(part, domain, scope, problems, allow_primed, fallback_pos)
    elif isinstance(expr, Bernoulli):
        _check_expr(expr.prob, domain, scope, problems, allow_primed, fallback_pos)


def _param_scope(params: Tuple[str, ...], types: Tuple[str, ...], what: str, problems: _Problems,
                 pos=None) -> Dict[str, str]:
    if len(params) != len(types):
        problems.add(RddlTypeError, f"{what} declares {len(params)} parameter(s), "
                                    f"schema has {len(types)}", pos)
    scope = {}
    for var, type_name in zip(params, types):
        if var in scope:
            problems.add(DuplicateDeclaration, f"parameter '{var}' repeated in {what}", pos)
        scope[var] = type_name
    return scope


def validate_domain(domain: DomainSpec, filename: str = "<string>") -> None:
    """Raise an RddlError subclass if the domain is not well formed."""
    problems = _Problems(filename)

    seen_types = set()
    for t in domain.types:
        if t in seen_types:
            problems.add(DuplicateDeclaration, f"type '{t}' declared twice")
        seen_types.add(t)

    seen: Dict[str, PVariable] = {}
    for pv in domain.pvariables:
        if pv.name in seen:
            problems.add(DuplicateDeclaration, f"pvariable '{pv.name}' declared twice", pv.position)
        seen[pv.name] = pv
        for t in pv.params:
            if t not in domain.types:
                problems.add(RddlTypeError, f"pvariable '{pv.name}' uses undeclared type '{t}'",
                             pv.position)
    interms = domain.of_kind(INTERM_FLUENT)
    if len(interms) > 1:
        problems.add(RddlTypeError, "at most one interm-fluent is supported", interms[1].position)
    for pv in interms:
        if pv.params:
            problems.add(RddlTypeError, f"interm-fluent '{pv.name}' must have no parameters",
                         pv.position)

    cpf_names = set()
    for cpf in domain.cpfs:
        pv = domain.pvariable(cpf.name)
        if pv is None:
            problems.add(RddlTypeError, f"cpf for undeclared fluent '{cpf.name}'", cpf.position)
            continue
        if pv.kind != STATE_FLUENT:
            problems.add(RddlTypeError, f"cpf for non-state fluent '{cpf.name}'", cpf.position)
        if cpf.name in cpf_names:
            problems.add(DuplicateDeclaration, f"second cpf for '{cpf.name}'", cpf.position)
        cpf_names.add(cpf.name)
        scope = _param_scope(cpf.params, pv.params, f"cpf '{cpf.name}'", problems, cpf.position)
        _check_expr(cpf.expr, domain, scope, problems, False, cpf.position)
    for pv in domain.of_kind(STATE_FLUENT):
        if pv.name not in cpf_names:
            problems.add(RddlTypeError, f"state fluent '{pv.name}' has no cpf", pv.position)

    term_names = set()
    for term in domain.reward_terms:
        if term.name in term_names:
            problems.add(DuplicateDeclaration, f"reward term '{term.name}' declared twice")
        term_names.add(term.name)
        if isinstance(term.weight, str):
            wpv = domain.pvariable(term.weight)
            if wpv is None or wpv.kind != NON_FLUENT or wpv.params:
                problems.add(RddlTypeError, f"reward weight '{term.weight}' must be a "
                                            f"parameterless non-fluent")
        _check_expr(term.expr, domain, {}, problems, True)

    for pre in domain.preconditions:
        pv = domain.pvariable(pre.action)
        if pv is None or pv.kind != ACTION_FLUENT:
            problems.add(RddlTypeError, f"precondition for undeclared action '{pre.action}'")
            continue
        scope = _param_scope(pre.params, pv.params, f"precondition of '{pre.action}'", problems)
        _check_expr(pre.expr, domain, scope, problems, False)

    for cost in domain.action_costs:
        pv = domain.pvariable(cost.action)
        if pv is None or pv.kind != ACTION_FLUENT:
            problems.add(RddlTypeError, f"cost for undeclared action '{cost.action}'")
            continue
        scope = _param_scope(cost.params, pv.params, f"cost of '{cost.action}'", problems)
        _check_expr(cost.expr, domain, scope, problems, False)
    if domain.default_action_cost > 0:
        problems.add(RddlTypeError, "default action cost must be <= 0")

    problems.raise_if_any()


def validate_instance(instance: InstanceSpec, domain: Optional[DomainSpec] = None,
                      filename: str = "<string>",
                      atom_positions: Optional[Dict] = None) -> None:
    """Raise an RddlError subclass if the instance is not well formed."""
    problems = _Problems(filename)
    positions = atom_positions or {}
    types_of = instance.object_types()

    for t, names in instance.objects:
        if len(set(names)) != len(names):
            problems.add(DuplicateDeclaration, f"object listed twice under type '{t}'")
        if domain is not None and t not in domain.types:
            problems.add(RddlTypeError, f"objects declared for undeclared type '{t}'")
    if instance.horizon < 1:
        problems.add(RddlTypeError, f"horizon must be >= 1, got {instance.horizon}")
    if domain is not None and instance.domain and instance.domain != domain.name:
        problems.add(RddlTypeError, f"instance targets domain '{instance.domain}', "
                                    f"not '{domain.name}'")

    def check_atom(name, args, section, kinds, pos):
        for obj in args:
            if obj not in types_of:
                problems.add(UnknownObject, f"unknown object '{obj}' in {section} literal "
                                            f"{format_atom(name, args)}", pos)
        if domain is None:
            return
        pv = domain.pvariable(name)
        if pv is None:
            problems.add(RddlTypeError, f"undeclared fluent '{name}' in {section}", pos)
            return
        if pv.kind not in kinds:
            if section == "goal" and pv.kind == ACTION_FLUENT:
                problems.add(GoalUsesActionFluent, f"goal uses action fluent '{name}'", pos)
            else:
                problems.add(RddlTypeError, f"'{name}' is a {pv.kind}, not allowed in {section}",
                             pos)
        if len(pv.params) != len(args):
            problems.add(RddlTypeError, f"'{name}' expects {len(pv.params)} argument(s)", pos)
            return
        for obj, expected in zip(args, pv.params):
            if obj in types_of and expected not in types_of[obj]:
                problems.add(RddlTypeError, f"object '{obj}' is not of type '{expected}'", pos)

    for (name, args), _value in instance.non_fluents:
        check_atom(name, args, "non-fluents", (NON_FLUENT,), positions.get((name, args)))
    for lit in instance.init_state:
        check_atom(lit.name, lit.args, "init-state", (STATE_FLUENT,), lit.position)
    for lit in instance.goal:
        check_atom(lit.name, lit.args, "goal", (STATE_FLUENT,), lit.position)
    if not instance.goal:
        problems.add(EmptyGoal, f"instance '{instance.name}' has an empty goal")

    problems.raise_if_any()


# ---------------------------------------------------------------- public API

def parse_domain(text: str, filename: str = "<string>") -> DomainSpec:
    """
    Parse and check a domain file.

    Args:
        text: Domain source
        filename: Name used in diagnostics

    Returns:
        DomainSpec

    Raises:
        RddlSyntaxError, RddlTypeError, DuplicateDeclaration
    """
    domain = _parse(text, "domain_file", filename, _SpecBuilder())
    validate_domain(domain, filename)
    logger.debug("parsed domain %s: %d pvariables, %d cpfs", domain.name,
                 len(domain.pvariables), len(domain.cpfs))
    return domain


def parse_instance(text: str, domain: Optional[DomainSpec] = None,
                   filename: str = "<string>") -> InstanceSpec:
    """
    Parse and check an instance file.

    When ``domain`` is given, literals are also checked against its
    pvariables (fluent kinds, arities and argument types).
    """
    builder = _SpecBuilder()
    instance = _parse(text, "instance_file", filename, builder)
    validate_instance(instance, domain, filename, builder.atom_positions)
    return instance


def check_domain(text: str, filename: str = "<string>"
                 ) -> Tuple[Optional[DomainSpec], List[Diagnostic]]:
    try:
        return parse_domain(text, filename), []
    except RddlError as exc:
        return None, exc.diagnostics


def check_instance(text: str, domain: Optional[DomainSpec] = None, filename: str = "<string>"
                   ) -> Tuple[Optional[InstanceSpec], List[Diagnostic]]:
    try:
        return parse_instance(text, domain, filename), []
    except RddlError as exc:
        return None, exc.diagnostics


def load_domain(path) -> DomainSpec:
    path = Path(path)
    return parse_domain(path.read_text(encoding="utf-8"), str(path))


def load_instance(path, domain: Optional[DomainSpec] = None) -> InstanceSpec:
    path = Path(path)
    return parse_instance(path.read_text(encoding="utf-8"), domain, str(path))


def parse_literal(text: str) -> Literal:
    """Parse ``name(a,b)`` or ``~name(a,b)`` as used in goal templates."""
    text = text.strip()
    positive = not text.startswith("~")
    body = text.lstrip("~").strip()
    if "(" in body:
        name, rest = body.split("(", 1)
        args = tuple(a.strip() for a in rest.rstrip(")").split(",") if a.strip())
    else:
        name, args = body, ()
    return Literal(name.strip(), args, positive)
