"""STRIPS-with-quantified-preconditions core: syntax, parsing, grounding, semantics."""
from .domain import (
    META_TYPES,
    OBJECT,
    PLAIN,
    PROPERTY_PREDICATE,
    TYPE_PREDICATE,
    ActionSchema,
    Domain,
    DomainError,
    GroundAction,
    Implication,
    PDDLSyntaxError,
    Predicate,
    Problem,
    State,
    check_domain,
    check_formula,
)
from .formulas import TRUE, And, Atom, Forall, Formula, Imply, Not, Or
from .grounding import all_constants, ground, instantiate
from .parser import parse_domain, parse_plan, parse_problem, print_domain, print_problem
from .semantics import PreconditionError, ValidationReport, apply, holds, progress, validate

__all__ = [
    "META_TYPES",
    "OBJECT",
    "PLAIN",
    "PROPERTY_PREDICATE",
    "TYPE_PREDICATE",
    "TRUE",
    "ActionSchema",
    "And",
    "Atom",
    "Domain",
    "DomainError",
    "Forall",
    "Formula",
    "GroundAction",
    "Implication",
    "Imply",
    "Not",
    "Or",
    "PDDLSyntaxError",
    "PreconditionError",
    "Predicate",
    "Problem",
    "State",
    "ValidationReport",
    "all_constants",
    "apply",
    "check_domain",
    "check_formula",
    "ground",
    "holds",
    "instantiate",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "print_domain",
    "print_problem",
    "progress",
    "validate",
]
