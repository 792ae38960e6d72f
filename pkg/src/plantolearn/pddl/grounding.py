"""Instantiation of action schemas over a finite set of typed constants."""
from __future__ import annotations

from itertools import product
from typing import Iterable, Mapping, Optional

from .domain import (
    META_TYPES,
    OBJECT,
    ActionSchema,
    Domain,
    DomainError,
    GroundAction,
    Implication,
)
from .formulas import Atom, Forall, Imply, Not, conjuncts, literal_parts, substitute


def all_constants(domain: Domain, objects: Optional[Mapping[str, str]] = None) -> dict[str, str]:
    constants = dict(domain.constant_types)
    if objects:
        for name, typ in objects.items():
            if name in constants and constants[name] != typ:
                raise DomainError(f"object {name} redeclared with type {typ}")
            constants[name] = typ
    return constants


def constants_of_type(constants: Mapping[str, str], typ: str) -> list[str]:
    if typ == OBJECT:
        return sorted(c for c, t in constants.items() if t not in META_TYPES)
    return sorted(c for c, t in constants.items() if t == typ)


def expand_forall(f: Forall, constants: Mapping[str, str]) -> list:
    """Instances of the quantified body, one per tuple of typed constants."""
    domains = [constants_of_type(constants, t) for _, t in f.params]
    variables = [v for v, _ in f.params]
    return [substitute(f.body, dict(zip(variables, combo))) for combo in product(*domains)]


def _implication(f: Imply) -> Implication:
    ante = literal_parts(f.antecedent)
    cons = literal_parts(f.consequent)
    if ante is None or cons is None:
        raise DomainError(f"implication must relate conjunctions of literals: {f}")
    return Implication(ante[0], ante[1], cons[0], cons[1])


def instantiate(schema: ActionSchema, args: Iterable[str], constants: Mapping[str, str]) -> GroundAction:
    """Ground one schema with the given arguments.

    Quantified preconditions are expanded over ``constants``.
    """
    args = tuple(args)
    if len(args) != schema.arity:
        raise DomainError(f"{schema.name} expects {schema.arity} arguments, got {len(args)}")
    for (var, typ), arg in zip(schema.params, args):
        if arg not in constants:
            raise DomainError(f"unknown constant {arg} for {schema.name}")
        if typ == OBJECT:
            if constants[arg] in META_TYPES:
                raise DomainError(f"{arg} is not an object argument of {schema.name}")
        elif constants[arg] != typ:
            raise DomainError(f"{arg} is not of type {typ} in {schema.name}")
    binding = dict(zip(schema.variables, args))
    pos, neg, imps = set(), set(), []
    for c in conjuncts(substitute(schema.pre, binding)):
        if isinstance(c, Atom):
            pos.add(c)
        elif isinstance(c, Not):
            neg.add(c.arg)
        elif isinstance(c, Imply):
            imps.append(_implication(c))
        elif isinstance(c, Forall):
            for inst in expand_forall(c, constants):
                imps.append(_implication(inst))
        else:
            raise DomainError(f"unsupported precondition in {schema.name}: {c}")
    return GroundAction(
        schema.name,
        args,
        frozenset(pos),
        frozenset(neg),
        tuple(imps),
        frozenset(a.substitute(binding) for a in schema.eff_add),
        frozenset(a.substitute(binding) for a in schema.eff_del),
    )


def ground(domain: Domain, objects: Optional[Mapping[str, str]] = None) -> list[GroundAction]:
    """All ground actions of ``domain`` over its constants plus ``objects``.

    The result is sorted by operator name, then arguments.
    """
    constants = all_constants(domain, objects)
    actions = []
    for schema in domain.schemas:
        domains = [constants_of_type(constants, t) for _, t in schema.params]
        for combo in product(*domains):
            actions.append(instantiate(schema, combo, constants))
    return actions
