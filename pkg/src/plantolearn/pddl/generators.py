"""Seeded random domains and problems for property-based testing.

Problems are kept small (a handful of predicates, at most four constants)
so that exhaustive search over the state space stays cheap.
"""
from __future__ import annotations

from itertools import product

import numpy as np

from .domain import PLAIN, TYPE_PREDICATE, ActionSchema, Domain, DomainError, Predicate, Problem, check_schema
from .formulas import And, Atom, Forall, Imply, Not, Or
from .grounding import all_constants, constants_of_type, ground
from .semantics import apply, holds

TYPES = ("A", "B")


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _random_atom(rng, predicates, terms):
    p = _pick(rng, predicates)
    return Atom(p.name, tuple(_pick(rng, terms) for _ in range(p.arity)))


def random_domain(
    rng: np.random.Generator,
    n_predicates: int = 4,
    n_schemas: int = 4,
    max_arity: int = 2,
    quantified: float = 0.2,
) -> Domain:
    """A well-formed random domain over type predicates ``A`` and ``B``."""
    # p0 is nullary so every schema has something to talk about
    plain = [Predicate(f"p{i}", int(rng.integers(0, max_arity + 1)) if i else 0, PLAIN) for i in range(n_predicates)]
    predicates = [Predicate(t, 1, TYPE_PREDICATE) for t in TYPES] + plain
    base = Domain("random", tuple(predicates))
    schemas = []
    while len(schemas) < n_schemas:
        arity = int(rng.integers(0, max_arity + 1))
        params = tuple((f"?x{i}", _pick(rng, TYPES + ("object",))) for i in range(arity))
        terms = [v for v, _ in params]
        usable = [p for p in plain if p.arity == 0 or terms]
        pre = []
        for _ in range(int(rng.integers(0, 3))):
            a = _random_atom(rng, usable, terms)
            pre.append(Not(a) if rng.random() < 0.3 else a)
        unary = [p for p in plain if p.arity == 1]
        if unary and rng.random() < quantified:
            ante, cons = _pick(rng, unary), _pick(rng, unary)
            pre.append(Forall((("?y", _pick(rng, TYPES)),), Imply(Atom(ante.name, ("?y",)), Atom(cons.name, ("?y",)))))
        add = {_random_atom(rng, usable, terms) for _ in range(int(rng.integers(1, 3)))}
        dele = {_random_atom(rng, usable, terms) for _ in range(int(rng.integers(0, 2)))}
        schema = ActionSchema(f"op{len(schemas)}", params, And(tuple(pre)), frozenset(add), frozenset(dele - add))
        try:
            check_schema(base, schema)
        except DomainError:
            continue
        schemas.append(schema)
    return Domain("random", tuple(predicates), tuple(schemas))


def ground_atoms(domain: Domain, constants) -> list[Atom]:
    names = sorted(c for c, t in constants.items())
    out = []
    for p in domain.predicates:
        if p.kind == TYPE_PREDICATE:
            continue
        for args in product(names, repeat=p.arity):
            out.append(Atom(p.name, args))
    return out


def random_problem(
    rng: np.random.Generator,
    domain: Domain | None = None,
    n_objects: int = 3,
    disjunctive: float = 0.3,
    reachable: float = 0.5,
    walk: int = 6,
) -> tuple[Domain, Problem]:
    """A random problem over ``domain`` (a fresh random one by default).

    With probability ``reachable`` the goal is a few literals true at the end
    of a random walk of up to ``walk`` actions, so a plan exists. Otherwise
    the literals are drawn at random and most such problems are unsolvable.
    """
    if domain is None:
        domain = random_domain(rng)
    objects = tuple((f"c{i}", _pick(rng, TYPES)) for i in range(n_objects))
    constants = all_constants(domain, dict(objects))
    atoms = ground_atoms(domain, constants)
    init = {a for a in atoms if rng.random() < 0.3}
    init |= {Atom(t, (c,)) for t in TYPES for c in constants_of_type(constants, t)}
    if rng.random() < reachable:
        return domain, _walk_problem(rng, domain, objects, frozenset(init), atoms, walk)
    goal: list = []
    # resample a few times to avoid goals that already hold initially
    for _ in range(5):
        goal = []
        for _ in range(int(rng.integers(1, 4))):
            if not atoms:
                break
            lit = _pick(rng, atoms)
            lit = Not(lit) if rng.random() < 0.2 else lit
            if rng.random() < disjunctive:
                lit = Or((lit, _pick(rng, atoms)))
            goal.append(lit)
        if not holds(frozenset(init), And(tuple(goal)), constants):
            break
    return domain, Problem("random", domain.name, objects, frozenset(init), And(tuple(goal)))


def _walk_problem(rng, domain: Domain, objects, init: frozenset, atoms, walk: int) -> Problem:
    actions = ground(domain, dict(objects))
    state = init
    for _ in range(int(rng.integers(1, walk + 1))):
        options = [a for a in actions if a.applicable(state)]
        if not options:
            break
        state = apply(state, _pick(rng, options))
    # literals that changed are the interesting ones; fall back to any true atom
    changed = sorted(state ^ init, key=str) or sorted(state - {a for a in init if a.predicate in TYPES}, key=str)
    goal = []
    for i in rng.permutation(len(changed))[: int(rng.integers(1, 4))]:
        a = changed[int(i)]
        goal.append(a if a in state else Not(a))
    return Problem("random", domain.name, objects, init, And(tuple(goal)))
