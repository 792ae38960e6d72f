"""Extension of a base domain into a domain for planning to learn properties.

The extension reifies type and property predicates as constants, keeps
track of what the agent knows about object properties through ``Known``
atoms, and adds three meta-operators:

``Observe(o, t, p)``
    collect views of ``o`` labelled with property name ``p``;
``Explore_for(t, p)``
    look for more objects of type ``t``;
``Train(t, p, q)``
    fit the ``(t, p)`` classifier with ``p`` views as positives and ``q``
    views as negatives.

Reified names are ordinary constants with the ``q_`` prefix: type ``Tv``
becomes ``q_tv`` (of type ``Type``) and property ``Is_Open`` becomes
``q_is_open`` and ``q_not_is_open`` (of type ``Property``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .pddl import (
    OBJECT,
    PLAIN,
    TYPE_PREDICATE,
    ActionSchema,
    And,
    Atom,
    Domain,
    DomainError,
    Forall,
    Imply,
    Not,
    Or,
    Predicate,
    check_domain,
)
from .pddl.domain import META_TYPES

NAME_PREFIX = "q_"
NEGATION_PREFIX = "not_"

KNOWN = "Known"
VIEWED = "Viewed"
SUFFICIENT_OBS = "Sufficient_Obs"
EXPLORED_FOR = "Explored_for"
LEARNED = "Learned"
DISCOVERED = "Discovered"

OBSERVE = "Observe"
EXPLORE_FOR = "Explore_for"
TRAIN = "Train"

LEARNING_PREDICATES = {
    KNOWN: 3,
    VIEWED: 3,
    SUFFICIENT_OBS: 2,
    EXPLORED_FOR: 1,
    LEARNED: 3,
    DISCOVERED: 2,
}
LEARNING_SCHEMAS = (OBSERVE, EXPLORE_FOR, TRAIN)


class ExtensionError(DomainError):
    pass


class AlreadyExtendedError(ExtensionError):
    pass


def reified(name: str) -> str:
    """Constant naming a type or property predicate: ``Is_Open -> q_is_open``."""
    return NAME_PREFIX + name.lower()


def reified_negation(name: str) -> str:
    return NAME_PREFIX + NEGATION_PREFIX + name.lower()


def unreify(constant: str) -> str:
    return constant[len(NAME_PREFIX):] if constant.startswith(NAME_PREFIX) else constant


@dataclass(frozen=True)
class TypePropertyPair:
    """A learnable pair, by predicate name."""

    type_predicate: str
    property_predicate: str

    @property
    def type_name(self) -> str:
        return reified(self.type_predicate)

    @property
    def prop_name(self) -> str:
        return reified(self.property_predicate)

    @property
    def neg_prop_name(self) -> str:
        return reified_negation(self.property_predicate)

    @property
    def key(self) -> str:
        return f"{unreify(self.type_name)}__{unreify(self.prop_name)}"

    def __str__(self) -> str:
        return f"({self.type_predicate}, {self.property_predicate})"


@dataclass
class ExtensionReport:
    pairs: list[tuple[str, str]] = field(default_factory=list)
    n_min: int = 50
    closeness_predicate: str = "Close_To"
    added_constants: list[tuple[str, str]] = field(default_factory=list)
    added_predicates: list[str] = field(default_factory=list)
    added_schemas: list[str] = field(default_factory=list)
    # schema name -> {"add": [...], "del": [...]} of Known literals
    modified_schemas: dict[str, dict[str, list[str]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pairs"] = [list(p) for p in self.pairs]
        d["added_constants"] = [list(c) for c in self.added_constants]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def is_extended(domain: Domain) -> bool:
    names = set(domain.predicate_map) | set(domain.schema_map)
    return bool(names & (set(LEARNING_PREDICATES) | set(LEARNING_SCHEMAS) | META_TYPES))


def base_types(domain: Domain) -> list[Predicate]:
    return [p for p in domain.type_predicates if p.name not in META_TYPES]


def _term_type(schema: ActionSchema, term: str, domain: Domain) -> str:
    if term.startswith("?"):
        return schema.param_type(term)
    return domain.constant_types[term]


def property_changes(domain: Domain) -> dict[tuple[str, str], dict[str, list[str]]]:
    """For each (type, property) the schemas making it true / false."""
    props = {p.name for p in domain.property_predicates}
    out: dict[tuple[str, str], dict[str, list[str]]] = {}
    for schema in domain.schemas:
        for effects, key in ((schema.eff_add, "add"), (schema.eff_del, "del")):
            for atom in effects:
                if atom.predicate not in props:
                    continue
                typ = _term_type(schema, atom.args[0], domain)
                out.setdefault((typ, atom.predicate), {"add": [], "del": []})[key].append(schema.name)
    return out


def resolve_pairs(domain: Domain, pairs: Iterable) -> list[TypePropertyPair]:
    """Map user-facing pair names to predicates, checking learnability.

    Names match predicates case-insensitively, with or without the reified
    ``q_`` prefix, so ``("tv", "is_turned_on")`` and ``("Tv",
    "Is_Turned_On")`` are the same pair.
    """
    types = {p.name.lower(): p.name for p in base_types(domain)}
    props = {p.name.lower(): p.name for p in domain.property_predicates}
    changes = property_changes(domain)
    out = []
    for pair in pairs:
        if isinstance(pair, TypePropertyPair):
            t, p = pair.type_predicate, pair.property_predicate
        else:
            t, p = pair
        tname = types.get(unreify(str(t)).lower())
        pname = props.get(unreify(str(p)).lower())
        if tname is None:
            raise ExtensionError(f"unknown type {t}")
        if pname is None:
            raise ExtensionError(f"unknown property {p}")
        ops = changes.get((tname, pname), {"add": [], "del": []})
        if not ops["add"] or not ops["del"]:
            raise ExtensionError(
                f"pair ({tname}, {pname}) is not learnable: the domain needs operators "
                f"on {tname} objects making {pname} true and false"
            )
        resolved = TypePropertyPair(tname, pname)
        if resolved not in out:
            out.append(resolved)
    return out


def reify_names(domain: Domain, report: ExtensionReport | None = None) -> Domain:
    """Add the ``Type``/``Property`` meta-types and a name constant per predicate."""
    if is_extended(domain):
        raise AlreadyExtendedError("domain already contains learning predicates or meta-types")
    new_constants = [(reified(t.name), "Type") for t in base_types(domain)]
    for p in domain.property_predicates:
        new_constants += [(reified(p.name), "Property"), (reified_negation(p.name), "Property")]
    existing = domain.constant_types
    for c, _ in new_constants:
        if c in existing:
            raise ExtensionError(f"name constant {c} collides with an existing constant")
    meta = [Predicate(m, 1, TYPE_PREDICATE) for m in sorted(META_TYPES)]
    if report is not None:
        report.added_constants += new_constants
        report.added_predicates += [m.name for m in meta]
    return domain.replace(
        predicates=domain.predicates + tuple(meta),
        constants=domain.constants + tuple(new_constants),
    )


def _ensure_predicates(domain: Domain, names: Sequence[str], report: ExtensionReport | None) -> Domain:
    missing = [n for n in names if n not in domain.predicate_map]
    if report is not None:
        report.added_predicates += missing
    return domain.replace(
        predicates=domain.predicates + tuple(Predicate(n, LEARNING_PREDICATES[n], PLAIN) for n in missing)
    )


def augment_known_effects(domain: Domain, report: ExtensionReport | None = None) -> Domain:
    """Make every property-changing effect also update the matching ``Known`` atoms."""
    if "Type" not in domain.predicate_map:
        raise ExtensionError("reify_names must be applied first")
    domain = _ensure_predicates(domain, [KNOWN], report)
    props = {p.name for p in domain.property_predicates}
    schemas = []
    for schema in domain.schemas:
        add, delete = set(schema.eff_add), set(schema.eff_del)
        new_add, new_del = [], []
        for effects, positive in ((schema.eff_add, True), (schema.eff_del, False)):
            for atom in sorted(effects, key=str):
                if atom.predicate not in props:
                    continue
                obj = atom.args[0]
                typ = _term_type(schema, obj, domain)
                if typ == OBJECT or typ in META_TYPES:
                    raise ExtensionError(
                        f"action {schema.name} changes {atom.predicate} of {obj} "
                        f"without fixing its type; give {obj} a type"
                    )
                yes = Atom(KNOWN, (obj, reified(typ), reified(atom.predicate)))
                no = Atom(KNOWN, (obj, reified(typ), reified_negation(atom.predicate)))
                made, unmade = (yes, no) if positive else (no, yes)
                new_add.append(made)
                new_del.append(unmade)
        if new_add:
            add.update(new_add)
            delete.update(new_del)
            schema = ActionSchema(schema.name, schema.params, schema.pre, frozenset(add), frozenset(delete))
            if report is not None:
                report.modified_schemas[schema.name] = {
                    "add": sorted(str(a) for a in new_add),
                    "del": sorted(str(a) for a in new_del),
                }
        schemas.append(schema)
    return domain.replace(schemas=tuple(schemas))


def learning_schemas(closeness: str = "Close_To") -> tuple[ActionSchema, ...]:
    o, t, p, q, x = "?o", "?t", "?p", "?q", "?x"
    observe = ActionSchema(
        OBSERVE,
        ((o, OBJECT), (t, "Type"), (p, "Property")),
        And((Not(Atom(VIEWED, (o, t, p))), Atom(closeness, (o,)), Atom(KNOWN, (o, t, p)))),
        frozenset({Atom(SUFFICIENT_OBS, (t, p)), Atom(VIEWED, (o, t, p))}),
    )
    explore = ActionSchema(
        EXPLORE_FOR,
        ((t, "Type"), (p, "Property")),
        And(
            (
                Forall(((x, OBJECT),), Imply(Atom(DISCOVERED, (x, t)), Atom(VIEWED, (x, t, p)))),
                Not(Atom(SUFFICIENT_OBS, (t, p))),
            )
        ),
        frozenset({Atom(EXPLORED_FOR, (t,))}),
    )
    train = ActionSchema(
        TRAIN,
        ((t, "Type"), (p, "Property"), (q, "Property")),
        And((Atom(SUFFICIENT_OBS, (t, p)), Atom(SUFFICIENT_OBS, (t, q)))),
        frozenset({Atom(LEARNED, (t, p, q))}),
    )
    return observe, explore, train


def add_learning_schemas(
    domain: Domain,
    pairs: Iterable = (),
    n_min: int = 50,
    closeness: str = "Close_To",
    report: ExtensionReport | None = None,
) -> Domain:
    """Add ``Observe``, ``Explore_for`` and ``Train`` and their predicates."""
    pred = domain.predicate_map.get(closeness)
    if pred is None or pred.arity != 1:
        raise ExtensionError(f"base domain lacks the unary closeness predicate {closeness}")
    if n_min < 1:
        raise ExtensionError("n_min must be positive")
    resolved = resolve_pairs(domain, pairs)
    clash = [s for s in LEARNING_SCHEMAS if s in domain.schema_map]
    if clash:
        raise AlreadyExtendedError(f"domain already has operator {clash[0]}")
    domain = _ensure_predicates(domain, list(LEARNING_PREDICATES), report)
    schemas = learning_schemas(closeness)
    if report is not None:
        report.added_schemas += [s.name for s in schemas]
        report.pairs = [(r.type_predicate, r.property_predicate) for r in resolved]
        report.n_min = n_min
        report.closeness_predicate = closeness
    return check_domain(domain.replace(schemas=domain.schemas + schemas))


def build_goal(pairs: Iterable[TypePropertyPair]) -> And:
    """Conjunction over pairs of ``Learned(t, p, not_p) or Explored_for(t)``."""
    pairs = [p if isinstance(p, TypePropertyPair) else TypePropertyPair(*p) for p in pairs]
    if not pairs:
        raise ExtensionError("goal needs at least one learnable pair")
    return And(
        tuple(
            Or(
                (
                    Atom(LEARNED, (pr.type_name, pr.prop_name, pr.neg_prop_name)),
                    Atom(EXPLORED_FOR, (pr.type_name,)),
                )
            )
            for pr in pairs
        )
    )


def extend(
    domain: Domain, pairs: Iterable = (), n_min: int = 50, closeness: str = "Close_To"
) -> tuple[Domain, ExtensionReport]:
    report = ExtensionReport(n_min=n_min, closeness_predicate=closeness)
    pairs = list(pairs)
    resolve_pairs(domain, pairs)
    ext = reify_names(domain, report)
    ext = augment_known_effects(ext, report)
    ext = add_learning_schemas(ext, pairs, n_min, closeness, report)
    return ext, report


class LearningDomainExtender(TransformerMixin, BaseEstimator):
    """Transformer from base domains to learning domains.

    Parameters
    ----------
    pairs : sequence of (type, property) names
        The learnable pairs; validated against the domain in :meth:`fit`.
    n_min : int
        Views per property name needed before ``Sufficient_Obs`` holds.
        Recorded in the report; enforced by the agent's execution monitor.
    closeness_predicate : str
        Unary predicate required by ``Observe``.
    """

    def __init__(self, pairs=(), n_min=50, closeness_predicate="Close_To"):
        self.pairs = pairs
        self.n_min = n_min
        self.closeness_predicate = closeness_predicate

    def fit(self, domain: Domain, y=None):
        self.pairs_ = resolve_pairs(domain, self.pairs)
        self.base_domain_ = domain
        return self

    def transform(self, domain: Domain) -> Domain:
        check_is_fitted(self, "pairs_")
        ext, report = extend(domain, self.pairs_, self.n_min, self.closeness_predicate)
        self.report_ = report
        return ext

    def goal(self) -> And:
        check_is_fitted(self, "pairs_")
        return build_goal(self.pairs_)
