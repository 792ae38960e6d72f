"""Reader and canonical writer for the PDDL subset.

Grammar (see ``docs/grammar.md`` for the full description)::

    domain  := (define (domain NAME) SECTION*)
    SECTION := (:requirements FLAG*)                ; accepted, ignored
             | (:type-predicates (NAME ?v)*)
             | (:property-predicates (NAME ?v)*)
             | (:predicates (NAME ?v*)*)
             | (:constants TYPED-LIST)
             | (:action NAME :parameters (TYPED-LIST)
                        [:precondition GD] [:effect EFFECT])
    problem := (define (problem NAME) (:domain NAME)
                 [(:objects TYPED-LIST)] [(:init ATOM*)] [(:goal GD)])

Identifiers are case sensitive.  ``;`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .domain import (
    OBJECT,
    PLAIN,
    PROPERTY_PREDICATE,
    TYPE_PREDICATE,
    ActionSchema,
    Domain,
    DomainError,
    PDDLSyntaxError,
    Predicate,
    Problem,
    check_domain,
    check_schema,
)
from .formulas import (
    TRUE,
    And,
    Atom,
    Forall,
    Formula,
    Imply,
    Not,
    Or,
    format_params,
)

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")


@dataclass
class Token:
    text: str
    line: int
    column: int


class Node(list):
    """A parenthesised list remembering where it started."""

    line: int = 0
    column: int = 0


SExpr = Union[Node, Token]


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        chunk = m.group()
        if not chunk.isspace() and not chunk.startswith(";"):
            tokens.append(Token(chunk, line, m.start() - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + chunk.rfind("\n") + 1
    return tokens


def read_sexpr(text: str) -> Node:
    tokens = tokenize(text)
    if not tokens:
        raise PDDLSyntaxError("empty input", 1, 1)
    stack: list[Node] = []
    root = None
    for tok in tokens:
        if tok.text == "(":
            node = Node()
            node.line, node.column = tok.line, tok.column
            if stack:
                stack[-1].append(node)
            elif root is not None:
                raise PDDLSyntaxError("unexpected content after top-level expression", tok.line, tok.column)
            else:
                root = node
            stack.append(node)
        elif tok.text == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", tok.line, tok.column)
            stack.pop()
        else:
            if not stack:
                raise PDDLSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.column)
            stack[-1].append(tok)
    if stack:
        raise PDDLSyntaxError("missing ')'", stack[-1].line, stack[-1].column)
    return root


def _loc(x: SExpr) -> tuple[int, int]:
    return x.line, x.column


def _err(msg: str, at: SExpr) -> PDDLSyntaxError:
    return PDDLSyntaxError(msg, *_loc(at))


def _word(x: SExpr, what: str = "identifier") -> str:
    if not isinstance(x, Token):
        raise _err(f"expected {what}", x)
    return x.text


def _head(node: SExpr) -> str:
    if isinstance(node, Node) and node and isinstance(node[0], Token):
        return node[0].text.lower()
    return ""


def _typed_list(items: list[SExpr], variables: bool) -> list[tuple[str, str, Token]]:
    """Parse ``a b - T c`` into ``[(a, T), (b, T), (c, object)]``."""
    out: list[tuple[str, str, Token]] = []
    pending: list[Token] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if not isinstance(tok, Token):
            raise _err("unexpected list in typed list", tok)
        if tok.text == "-":
            if i + 1 >= len(items) or not pending:
                raise _err("dangling '-' in typed list", tok)
            typ = _word(items[i + 1], "type name")
            out.extend((p.text, typ, p) for p in pending)
            pending = []
            i += 2
            continue
        if variables != tok.text.startswith("?"):
            raise _err(f"{'variable' if variables else 'name'} expected, got {tok.text!r}", tok)
        pending.append(tok)
        i += 1
    out.extend((p.text, OBJECT, p) for p in pending)
    return out


class _Scope:
    """Declarations visible while reading formulas, for located diagnostics."""

    def __init__(self, arities: dict[str, int], constants: set[str]):
        self.arities = arities
        self.constants = constants

    def check(self, atom: Atom, node: SExpr, bound: set[str]):
        arity = self.arities.get(atom.predicate)
        if arity is None:
            raise _err(f"undeclared predicate {atom.predicate}", node)
        if arity != len(atom.args):
            raise _err(f"arity mismatch for {atom.predicate}: expected {arity}, got {len(atom.args)}", node)
        for a in atom.args:
            if a.startswith("?"):
                if a not in bound:
                    raise _err(f"unbound variable {a}", node)
            elif a not in self.constants:
                raise _err(f"undeclared constant {a}", node)


def _atom(node: SExpr, scope: _Scope, bound: set[str]) -> Atom:
    if not isinstance(node, Node) or not node:
        raise _err("expected atom", node)
    name = _word(node[0], "predicate name")
    atom = Atom(name, tuple(_word(a, "term") for a in node[1:]))
    scope.check(atom, node, bound)
    return atom


def _formula(node: SExpr, scope: _Scope, bound: set[str]) -> Formula:
    if not isinstance(node, Node):
        raise _err("expected formula", node)
    head = _head(node)
    if head == "and":
        return And(tuple(_formula(x, scope, bound) for x in node[1:]))
    if head == "or":
        return Or(tuple(_formula(x, scope, bound) for x in node[1:]))
    if head == "not":
        if len(node) != 2:
            raise _err("not takes one argument", node)
        return Not(_formula(node[1], scope, bound))
    if head == "imply":
        if len(node) != 3:
            raise _err("imply takes two arguments", node)
        return Imply(_formula(node[1], scope, bound), _formula(node[2], scope, bound))
    if head == "forall":
        if len(node) != 3 or not isinstance(node[1], Node):
            raise _err("malformed forall", node)
        params = tuple((v, t) for v, t, _ in _typed_list(list(node[1]), variables=True))
        return Forall(params, _formula(node[2], scope, bound | {v for v, _ in params}))
    if head in ("exists", "when", "="):
        raise _err(f"unsupported construct {head!r}", node)
    return _atom(node, scope, bound)


def _effect(node: SExpr, scope: _Scope, bound: set[str]) -> tuple[frozenset[Atom], frozenset[Atom]]:
    add, delete = set(), set()
    items = node[1:] if _head(node) == "and" else [node]
    for item in items:
        if _head(item) == "not":
            if len(item) != 2:
                raise _err("not takes one argument", item)
            delete.add(_atom(item[1], scope, bound))
        elif _head(item) in ("forall", "when", "and", "or"):
            raise _err(f"unsupported effect construct {_head(item)!r}", item)
        else:
            add.add(_atom(item, scope, bound))
    return frozenset(add), frozenset(delete)


def _as_conjunction(f: Formula) -> And:
    return f if isinstance(f, And) else And((f,))


def _parse_action(node: Node, scope: _Scope) -> ActionSchema:
    if len(node) < 2:
        raise _err("action without name", node)
    name = _word(node[1], "action name")
    params: tuple = ()
    pre_node = eff_node = None
    i = 2
    seen = set()
    while i < len(node):
        key = _word(node[i], "action keyword").lower()
        if key in seen:
            raise _err(f"repeated {key} in action {name}", node[i])
        seen.add(key)
        if i + 1 >= len(node):
            raise _err(f"missing value for {key}", node[i])
        value = node[i + 1]
        if key == ":parameters":
            if not isinstance(value, Node):
                raise _err("parameters must be a list", value)
            params = tuple((v, t) for v, t, _ in _typed_list(list(value), variables=True))
        elif key == ":precondition":
            pre_node = value
        elif key == ":effect":
            eff_node = value
        else:
            raise _err(f"unknown action keyword {key}", node[i])
        i += 2
    bound = {v for v, _ in params}
    pre = _as_conjunction(_formula(pre_node, scope, bound)) if pre_node is not None else TRUE
    add, delete = _effect(eff_node, scope, bound) if eff_node is not None else (frozenset(), frozenset())
    return ActionSchema(name, params, pre, add, delete)


def parse_domain(text: str) -> Domain:
    """Parse domain source text into a checked :class:`Domain`.

    Errors carry the line and column of the offending expression.
    """
    root = read_sexpr(text)
    if _head(root) != "define" or len(root) < 2 or _head(root[1]) != "domain":
        raise _err("expected (define (domain NAME) ...)", root)
    if len(root[1]) != 2:
        raise _err("expected (domain NAME)", root[1])
    name = _word(root[1][1], "domain name")
    predicates: dict[str, Predicate] = {}
    constants: list[tuple[str, str, Token]] = []
    action_nodes: list[Node] = []
    kinds = {
        ":type-predicates": TYPE_PREDICATE,
        ":property-predicates": PROPERTY_PREDICATE,
        ":predicates": PLAIN,
    }
    for section in root[2:]:
        head = _head(section)
        if head == ":requirements":
            continue
        if head in kinds:
            for decl in section[1:]:
                if not isinstance(decl, Node) or not decl:
                    raise _err("expected predicate declaration", decl)
                pname = _word(decl[0], "predicate name")
                if pname in predicates:
                    raise _err(f"duplicate predicate {pname}", decl)
                arity = len(_typed_list(list(decl[1:]), variables=True))
                try:
                    predicates[pname] = Predicate(pname, arity, kinds[head])
                except DomainError as exc:
                    raise _err(exc.message, decl) from None
        elif head == ":constants":
            constants.extend(_typed_list(list(section[1:]), variables=False))
        elif head == ":action":
            action_nodes.append(section)
        else:
            raise _err(f"unknown domain section {head or section!r}", section)

    seen_constants = set()
    for c, t, tok in constants:
        if c in seen_constants:
            raise _err(f"duplicate constant {c}", tok)
        seen_constants.add(c)
        if t not in predicates or predicates[t].kind != TYPE_PREDICATE:
            raise _err(f"constant {c} has undeclared type {t}", tok)
    scope = _Scope({p.name: p.arity for p in predicates.values()}, seen_constants)
    base = Domain(name, tuple(predicates.values()), (), tuple((c, t) for c, t, _ in constants))
    schemas: dict[str, ActionSchema] = {}
    for node in action_nodes:
        schema = _parse_action(node, scope)
        if schema.name in schemas:
            raise _err(f"duplicate operator {schema.name}", node)
        try:
            check_schema(base, schema)
        except DomainError as exc:
            raise _err(exc.message, node) from None
        schemas[schema.name] = schema
    return check_domain(base.replace(schemas=tuple(schemas.values())))


def parse_problem(text: str, domain: Domain) -> Problem:
    root = read_sexpr(text)
    if _head(root) != "define" or len(root) < 2 or _head(root[1]) != "problem":
        raise _err("expected (define (problem NAME) ...)", root)
    name = _word(root[1][1], "problem name")
    domain_name = domain.name
    objects: list[tuple[str, str]] = []
    init: set[Atom] = set()
    goal: Formula = TRUE
    arities = {p.name: p.arity for p in domain.predicates}
    pending_init: list[SExpr] = []
    goal_node = None
    for section in root[2:]:
        head = _head(section)
        if head == ":domain":
            domain_name = _word(section[1], "domain name")
        elif head == ":objects":
            for o, t, tok in _typed_list(list(section[1:]), variables=False):
                pred = domain.predicate_map.get(t)
                if pred is None or pred.kind != TYPE_PREDICATE:
                    raise _err(f"object {o} has undeclared type {t}", tok)
                objects.append((o, t))
        elif head == ":init":
            pending_init.extend(section[1:])
        elif head == ":goal":
            if len(section) != 2:
                raise _err("goal takes one formula", section)
            goal_node = section[1]
        else:
            raise _err(f"unknown problem section {head!r}", section)
    if domain_name != domain.name:
        raise _err(f"problem is for domain {domain_name}, not {domain.name}", root)
    dup = [o for o, _ in objects if o in domain.constant_types]
    if dup:
        raise _err(f"object {dup[0]} clashes with a domain constant", root)
    scope = _Scope(arities, set(domain.constant_types) | {o for o, _ in objects})
    for node in pending_init:
        atom = _atom(node, scope, set())
        init.add(atom)
    if goal_node is not None:
        goal = _formula(goal_node, scope, set())
    return Problem(name, domain_name, tuple(objects), frozenset(init), goal)


# ---------------------------------------------------------------------------
# printing


def _pred_decl(p: Predicate) -> str:
    if p.arity == 0:
        return f"({p.name})"
    if p.arity == 1:
        return f"({p.name} ?x)"
    return f"({p.name} {' '.join(f'?x{i + 1}' for i in range(p.arity))})"


def _typed_names(pairs) -> list[str]:
    by_type: dict[str, list[str]] = {}
    for name, typ in pairs:
        by_type.setdefault(typ, []).append(name)
    lines = []
    for typ in sorted(by_type, key=lambda t: (t == OBJECT, t)):
        names = " ".join(sorted(by_type[typ]))
        lines.append(names if typ == OBJECT else f"{names} - {typ}")
    return lines


def _format_conjunction(f: Formula, indent: str, keep_and: bool = False) -> str:
    if isinstance(f, And) and (len(f.items) > 1 or keep_and and f.items):
        inner = f"\n{indent}  ".join(str(i) for i in f.items)
        return f"(and\n{indent}  {inner})"
    if isinstance(f, And) and len(f.items) == 1:
        return str(f.items[0])
    return str(f)


def print_schema(s: ActionSchema) -> str:
    lines = [f"  (:action {s.name}", f"    :parameters ({format_params(s.params)})"]
    lines.append(f"    :precondition {_format_conjunction(s.pre, '    ')}")
    effects = [str(a) for a in sorted(s.eff_add, key=str)]
    effects += [f"(not {a})" for a in sorted(s.eff_del, key=str)]
    if not effects:
        lines.append("    :effect (and))")
    elif len(effects) == 1:
        lines.append(f"    :effect {effects[0]})")
    else:
        joined = "\n      ".join(effects)
        lines.append(f"    :effect (and\n      {joined}))")
    return "\n".join(lines)


def print_domain(domain: Domain) -> str:
    """Canonical text: sections in fixed order, entries alphabetical."""
    out = [f"(define (domain {domain.name})"]
    for header, kind in (
        (":type-predicates", TYPE_PREDICATE),
        (":property-predicates", PROPERTY_PREDICATE),
        (":predicates", PLAIN),
    ):
        preds = domain.predicates_of_kind(kind)
        if preds:
            body = "\n    ".join(_pred_decl(p) for p in preds)
            out.append(f"  ({header}\n    {body})")
    if domain.constants:
        body = "\n    ".join(_typed_names(domain.constants))
        out.append(f"  (:constants\n    {body})")
    for s in domain.schemas:
        out.append(print_schema(s))
    out[-1] += ")"
    return "\n".join(out) + "\n"


def print_problem(problem: Problem) -> str:
    out = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})"]
    if problem.objects:
        body = "\n    ".join(_typed_names(problem.objects))
        out.append(f"  (:objects\n    {body})")
    if problem.init:
        body = "\n    ".join(str(a) for a in sorted(problem.init, key=str))
        out.append(f"  (:init\n    {body})")
    else:
        out.append("  (:init)")
    out.append(f"  (:goal {_format_conjunction(problem.goal, '  ', keep_and=True)}))")
    return "\n".join(out) + "\n"


def parse_plan(text: str) -> list[tuple[str, tuple[str, ...]]]:
    """Read a plan file: one ``(op arg ...)`` per line, ``;`` comments."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise PDDLSyntaxError(f"malformed plan step {line!r}", lineno, 1)
        parts = line[1:-1].split()
        if not parts:
            raise PDDLSyntaxError("empty plan step", lineno, 1)
        steps.append((parts[0], tuple(parts[1:])))
    return steps
