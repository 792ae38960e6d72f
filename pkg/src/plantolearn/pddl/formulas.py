"""Formula syntax trees for the PDDL subset.

Terms are plain strings: variables start with ``?``, everything else is a
constant. A ground atom is an :class:`Atom` whose arguments are all
constants.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union


def is_variable(term: str) -> bool:
    return term.startswith("?")


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return f"({self.predicate} {' '.join(self.args)})"

    def substitute(self, binding: Mapping[str, str]) -> "Atom":
        return Atom(self.predicate, tuple(binding.get(a, a) for a in self.args))

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)


@dataclass(frozen=True, slots=True)
class Not:
    arg: "Formula"

    def __str__(self) -> str:
        return f"(not {self.arg})"


@dataclass(frozen=True, slots=True)
class And:
    items: tuple["Formula", ...] = ()

    def __str__(self) -> str:
        if not self.items:
            return "(and)"
        return f"(and {' '.join(str(i) for i in self.items)})"


@dataclass(frozen=True, slots=True)
class Or:
    items: tuple["Formula", ...] = ()

    def __str__(self) -> str:
        return f"(or {' '.join(str(i) for i in self.items)})"


@dataclass(frozen=True, slots=True)
class Imply:
    antecedent: "Formula"
    consequent: "Formula"

    def __str__(self) -> str:
        return f"(imply {self.antecedent} {self.consequent})"


@dataclass(frozen=True, slots=True)
class Forall:
    """Universal quantification over the typed constants of the problem.

    ``params`` pairs each variable with a type name (``"object"`` means any
    non-meta constant).
    """

    params: tuple[tuple[str, str], ...]
    body: "Formula"

    def __str__(self) -> str:
        return f"(forall ({format_params(self.params)}) {self.body})"


Formula = Union[Atom, Not, And, Or, Imply, Forall]

TRUE = And(())


def format_params(params) -> str:
    """Typed-list text.

    A type applies to every name before it, so untyped (``object``) entries
    need an explicit type unless they come last.
    """
    groups: list[tuple[str, list[str]]] = []
    for var, typ in params:
        if groups and groups[-1][0] == typ:
            groups[-1][1].append(var)
        else:
            groups.append((typ, [var]))
    parts = []
    for i, (typ, names) in enumerate(groups):
        joined = " ".join(names)
        if typ == "object" and i == len(groups) - 1:
            parts.append(joined)
        else:
            parts.append(f"{joined} - {typ}")
    return " ".join(parts)


def substitute(f: Formula, binding: Mapping[str, str]) -> Formula:
    """Replace free variables according to ``binding``."""
    if isinstance(f, Atom):
        return f.substitute(binding)
    if isinstance(f, Not):
        return Not(substitute(f.arg, binding))
    if isinstance(f, And):
        return And(tuple(substitute(i, binding) for i in f.items))
    if isinstance(f, Or):
        return Or(tuple(substitute(i, binding) for i in f.items))
    if isinstance(f, Imply):
        return Imply(substitute(f.antecedent, binding), substitute(f.consequent, binding))
    if isinstance(f, Forall):
        bound = {v for v, _ in f.params}
        inner = {k: v for k, v in binding.items() if k not in bound}
        return Forall(f.params, substitute(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


def atoms(f: Formula) -> Iterator[Atom]:
    """Yield every atom occurring in ``f`` (with repetitions)."""
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from atoms(f.arg)
    elif isinstance(f, (And, Or)):
        for i in f.items:
            yield from atoms(i)
    elif isinstance(f, Imply):
        yield from atoms(f.antecedent)
        yield from atoms(f.consequent)
    elif isinstance(f, Forall):
        yield from atoms(f.body)
    else:
        raise TypeError(f"not a formula: {f!r}")


def free_variables(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        return {a for a in f.args if is_variable(a)}
    if isinstance(f, Not):
        return free_variables(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for i in f.items:
            out |= free_variables(i)
        return out
    if isinstance(f, Imply):
        return free_variables(f.antecedent) | free_variables(f.consequent)
    if isinstance(f, Forall):
        return free_variables(f.body) - {v for v, _ in f.params}
    raise TypeError(f"not a formula: {f!r}")


def conjuncts(f: Formula) -> tuple[Formula, ...]:
    """Flatten nested conjunctions."""
    if isinstance(f, And):
        out: list[Formula] = []
        for i in f.items:
            out.extend(conjuncts(i))
        return tuple(out)
    return (f,)


def literal_parts(f: Formula) -> tuple[frozenset[Atom], frozenset[Atom]] | None:
    """Split a conjunction of literals into (positive, negative) atoms.

    Returns None when ``f`` is not a conjunction of literals.
    """
    pos, neg = set(), set()
    for c in conjuncts(f):
        if isinstance(c, Atom):
            pos.add(c)
        elif isinstance(c, Not) and isinstance(c.arg, Atom):
            neg.add(c.arg)
        else:
            return None
    return frozenset(pos), frozenset(neg)
