"""Domains, action schemas, ground actions and states."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

from .formulas import (
    And,
    Atom,
    Forall,
    Formula,
    Imply,
    Not,
    Or,
    TRUE,
    conjuncts,
    free_variables,
    is_variable,
    literal_parts,
)

TYPE_PREDICATE = "type-predicate"
PROPERTY_PREDICATE = "property-predicate"
PLAIN = "plain"
PREDICATE_KINDS = (TYPE_PREDICATE, PROPERTY_PREDICATE, PLAIN)

# Constants of these types are reified names, not physical objects; the
# implicit ``object`` parameter type never ranges over them.
META_TYPES = frozenset({"Type", "Property"})
OBJECT = "object"

# A state is a set of ground atoms.
State = frozenset


class DomainError(ValueError):
    """A domain or problem violates a well-formedness rule."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class PDDLSyntaxError(DomainError):
    pass


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int
    kind: str = PLAIN

    def __post_init__(self):
        if self.kind not in PREDICATE_KINDS:
            raise DomainError(f"unknown predicate kind {self.kind!r}")
        if self.arity < 0:
            raise DomainError(f"negative arity for {self.name}")
        if self.kind != PLAIN and self.arity != 1:
            raise DomainError(f"{self.kind} {self.name} must be unary")


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...] = ()
    pre: Formula = TRUE
    eff_add: frozenset[Atom] = frozenset()
    eff_del: frozenset[Atom] = frozenset()

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.params)

    def param_type(self, var: str) -> str:
        for v, t in self.params:
            if v == var:
                return t
        raise KeyError(var)


@dataclass(frozen=True)
class Domain:
    """A planning domain with its declared constants.

    Predicates, schemas and constants are kept sorted so that two domains
    with the same content compare equal regardless of declaration order.
    """

    name: str = "domain"
    predicates: tuple[Predicate, ...] = ()
    schemas: tuple[ActionSchema, ...] = ()
    constants: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(sorted(self.predicates, key=lambda p: p.name)))
        object.__setattr__(self, "schemas", tuple(sorted(self.schemas, key=lambda s: s.name)))
        object.__setattr__(self, "constants", tuple(sorted(self.constants)))

    @cached_property
    def predicate_map(self) -> dict[str, Predicate]:
        return {p.name: p for p in self.predicates}

    @cached_property
    def schema_map(self) -> dict[str, ActionSchema]:
        return {s.name: s for s in self.schemas}

    @cached_property
    def constant_types(self) -> dict[str, str]:
        return dict(self.constants)

    def predicate(self, name: str) -> Predicate:
        return self.predicate_map[name]

    def schema(self, name: str) -> ActionSchema:
        return self.schema_map[name]

    def predicates_of_kind(self, kind: str) -> tuple[Predicate, ...]:
        return tuple(p for p in self.predicates if p.kind == kind)

    @property
    def type_predicates(self) -> tuple[Predicate, ...]:
        return self.predicates_of_kind(TYPE_PREDICATE)

    @property
    def property_predicates(self) -> tuple[Predicate, ...]:
        return self.predicates_of_kind(PROPERTY_PREDICATE)

    def replace(self, **changes) -> "Domain":
        fields = dict(
            name=self.name,
            predicates=self.predicates,
            schemas=self.schemas,
            constants=self.constants,
        )
        fields.update(changes)
        return Domain(**fields)


@dataclass(frozen=True)
class Implication:
    """Ground ``(imply A B)`` with A and B conjunctions of literals."""

    ante_pos: frozenset[Atom] = frozenset()
    ante_neg: frozenset[Atom] = frozenset()
    cons_pos: frozenset[Atom] = frozenset()
    cons_neg: frozenset[Atom] = frozenset()

    def holds(self, state: frozenset) -> bool:
        if not (self.ante_pos <= state) or not self.ante_neg.isdisjoint(state):
            return True
        return self.cons_pos <= state and self.cons_neg.isdisjoint(state)

    def to_formula(self) -> Imply:
        return Imply(_literal_conj(self.ante_pos, self.ante_neg), _literal_conj(self.cons_pos, self.cons_neg))


def _literal_conj(pos, neg) -> Formula:
    items = [*sorted(pos, key=str), *(Not(a) for a in sorted(neg, key=str))]
    if len(items) == 1:
        return items[0]
    return And(tuple(items))


@dataclass(frozen=True)
class GroundAction:
    operator: str
    args: tuple[str, ...]
    pos: frozenset[Atom] = frozenset()
    neg: frozenset[Atom] = frozenset()
    implications: tuple[Implication, ...] = ()
    add: frozenset[Atom] = frozenset()
    delete: frozenset[Atom] = frozenset()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.operator})"
        return f"({self.operator} {' '.join(self.args)})"

    @property
    def name(self) -> str:
        return str(self)

    @property
    def pre(self) -> Formula:
        items: list[Formula] = sorted(self.pos, key=str)
        items += [Not(a) for a in sorted(self.neg, key=str)]
        items += [i.to_formula() for i in self.implications]
        return And(tuple(items))

    def applicable(self, state: frozenset) -> bool:
        return (
            self.pos <= state
            and self.neg.isdisjoint(state)
            and all(i.holds(state) for i in self.implications)
        )


# ---------------------------------------------------------------------------
# well-formedness


def _check_atom(domain: Domain, atom: Atom, bound: set[str], where: str):
    pred = domain.predicate_map.get(atom.predicate)
    if pred is None:
        raise DomainError(f"undeclared predicate {atom.predicate} in {where}")
    if pred.arity != len(atom.args):
        raise DomainError(
            f"arity mismatch for {atom.predicate} in {where}: expected {pred.arity}, got {len(atom.args)}"
        )
    for a in atom.args:
        if is_variable(a):
            if a not in bound:
                raise DomainError(f"unbound variable {a} in {where}")
        elif a not in domain.constant_types:
            raise DomainError(f"undeclared constant {a} in {where}")


def _check_type(domain: Domain, typ: str, where: str):
    if typ == OBJECT:
        return
    pred = domain.predicate_map.get(typ)
    if pred is None or pred.kind != TYPE_PREDICATE:
        raise DomainError(f"unknown type {typ} in {where}")


def check_precondition_shape(pre: Formula, where: str):
    """Preconditions are conjunctions of literals and quantified implications."""
    for c in conjuncts(pre):
        if isinstance(c, Atom) or (isinstance(c, Not) and isinstance(c.arg, Atom)):
            continue
        if isinstance(c, Forall) and isinstance(c.body, Imply):
            if literal_parts(c.body.antecedent) is None or literal_parts(c.body.consequent) is None:
                raise DomainError(f"quantified implication in {where} must relate conjunctions of literals")
            continue
        if isinstance(c, Imply):
            if literal_parts(c.antecedent) is None or literal_parts(c.consequent) is None:
                raise DomainError(f"implication in {where} must relate conjunctions of literals")
            continue
        raise DomainError(f"unsupported precondition construct in {where}: {c}")


def _unifiable(a: Atom, b: Atom, types: dict[str, str], const_types: dict[str, str]) -> bool:
    """Whether some substitution of schema variables makes ``a == b``."""
    if a.predicate != b.predicate or len(a.args) != len(b.args):
        return False
    parent: dict[str, str] = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    for x, y in zip(a.args, b.args):
        rx, ry = find(x), find(y)
        if rx == ry:
            continue
        if not is_variable(rx) and not is_variable(ry):
            return False
        if is_variable(rx):
            parent[rx] = ry
        else:
            parent[ry] = rx
    # every class may contain at most one constant and compatible types
    classes: dict[str, list[str]] = {}
    for term in set(a.args) | set(b.args):
        classes.setdefault(find(term), []).append(term)
    for members in classes.values():
        consts = [m for m in members if not is_variable(m)]
        if len(consts) > 1:
            return False
        concrete = {types[m] for m in members if is_variable(m) and types.get(m, OBJECT) != OBJECT}
        if len(concrete) > 1:
            return False
        if consts and concrete and const_types.get(consts[0]) not in concrete:
            return False
    return True


def check_schema(domain: Domain, schema: ActionSchema):
    where = f"action {schema.name}"
    variables = schema.variables
    if len(set(variables)) != len(variables):
        raise DomainError(f"duplicate parameter in {where}")
    for v, t in schema.params:
        if not is_variable(v):
            raise DomainError(f"parameter {v} of {where} is not a variable")
        _check_type(domain, t, where)
    check_precondition_shape(schema.pre, where)
    bound = set(variables)
    _check_formula(domain, schema.pre, bound, where)
    for atom in schema.eff_add | schema.eff_del:
        _check_atom(domain, atom, bound, where)
    types = dict(schema.params)
    for a in schema.eff_add:
        for d in schema.eff_del:
            if _unifiable(a, d, types, domain.constant_types):
                raise DomainError(f"{where} may both add and delete {a} / {d}")


def _check_formula(domain: Domain, f: Formula, bound: set[str], where: str):
    if isinstance(f, Atom):
        _check_atom(domain, f, bound, where)
    elif isinstance(f, Not):
        _check_formula(domain, f.arg, bound, where)
    elif isinstance(f, (And, Or)):
        for i in f.items:
            _check_formula(domain, i, bound, where)
    elif isinstance(f, Imply):
        _check_formula(domain, f.antecedent, bound, where)
        _check_formula(domain, f.consequent, bound, where)
    elif isinstance(f, Forall):
        for v, t in f.params:
            _check_type(domain, t, where)
        _check_formula(domain, f.body, bound | {v for v, _ in f.params}, where)
    else:
        raise DomainError(f"not a formula in {where}: {f!r}")


def check_formula(domain: Domain, f: Formula, objects: dict[str, str] | None = None, where: str = "formula"):
    """Check that ``f`` is closed and only uses declared predicates/constants."""
    if objects:
        domain = domain.replace(constants=tuple({**domain.constant_types, **objects}.items()))
    fv = free_variables(f)
    if fv:
        raise DomainError(f"unbound variable {sorted(fv)[0]} in {where}")
    _check_formula(domain, f, set(), where)


def check_domain(domain: Domain) -> Domain:
    names = [p.name for p in domain.predicates]
    dup = _first_duplicate(names)
    if dup:
        raise DomainError(f"duplicate predicate {dup}")
    dup = _first_duplicate([s.name for s in domain.schemas])
    if dup:
        raise DomainError(f"duplicate operator {dup}")
    dup = _first_duplicate([c for c, _ in domain.constants])
    if dup:
        raise DomainError(f"duplicate constant {dup}")
    for c, t in domain.constants:
        pred = domain.predicate_map.get(t)
        if pred is None or pred.kind != TYPE_PREDICATE:
            raise DomainError(f"constant {c} has undeclared type {t}")
    for s in domain.schemas:
        check_schema(domain, s)
    return domain


def _first_duplicate(items: Iterable[str]) -> Optional[str]:
    seen = set()
    for i in items:
        if i in seen:
            return i
        seen.add(i)
    return None


@dataclass(frozen=True)
class Problem:
    """A problem file: typed objects, initial atoms and a goal."""

    name: str = "problem"
    domain_name: str = "domain"
    objects: tuple[tuple[str, str], ...] = ()
    init: frozenset[Atom] = field(default_factory=frozenset)
    goal: Formula = TRUE

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(sorted(self.objects)))
        object.__setattr__(self, "init", frozenset(self.init))

    @property
    def object_types(self) -> dict[str, str]:
        return dict(self.objects)
