"""Truth evaluation, state transitions and plan validation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .domain import Domain, DomainError, GroundAction
from .formulas import And, Atom, Forall, Formula, Imply, Not, Or
from .grounding import all_constants, expand_forall, instantiate


class PreconditionError(DomainError):
    """An action was applied in a state violating its precondition."""

    def __init__(self, action: GroundAction, literal: Formula):
        self.action = action
        self.literal = literal
        super().__init__(f"precondition of {action} violated: {literal}")


def holds(state: frozenset, f: Formula, constants: Optional[Mapping[str, str]] = None) -> bool:
    """Evaluate ``f`` in ``state`` under the closed-world assumption.

    ``constants`` maps constant names to types and is only needed to expand
    universal quantifiers.
    """
    if isinstance(f, Atom):
        for a in f.args:
            if a.startswith("?"):
                raise DomainError(f"unbound variable {a} in {f}")
        return f in state
    if isinstance(f, Not):
        return not holds(state, f.arg, constants)
    if isinstance(f, And):
        return all(holds(state, i, constants) for i in f.items)
    if isinstance(f, Or):
        return any(holds(state, i, constants) for i in f.items)
    if isinstance(f, Imply):
        return not holds(state, f.antecedent, constants) or holds(state, f.consequent, constants)
    if isinstance(f, Forall):
        if constants is None:
            raise DomainError("quantified formula needs the set of constants")
        return all(holds(state, inst, constants) for inst in expand_forall(f, constants))
    raise TypeError(f"not a formula: {f!r}")


def first_violation(state: frozenset, action: GroundAction) -> Optional[Formula]:
    for a in sorted(action.pos, key=str):
        if a not in state:
            return a
    for a in sorted(action.neg, key=str):
        if a in state:
            return Not(a)
    for imp in action.implications:
        if not imp.holds(state):
            return imp.to_formula()
    return None


def apply(state: frozenset, action: GroundAction) -> frozenset:
    """Successor state ``(state | add) - delete``."""
    bad = first_violation(state, action)
    if bad is not None:
        raise PreconditionError(action, bad)
    return (state | action.add) - action.delete


def progress(state: frozenset, action: GroundAction) -> frozenset:
    """Apply effects without checking the precondition."""
    return (state | action.add) - action.delete


Step = Union[GroundAction, tuple]


@dataclass
class ValidationReport:
    valid: bool
    failed_step: Optional[int] = None
    reason: str = ""
    states: list = field(default_factory=list)

    @property
    def final_state(self) -> Optional[frozenset]:
        return self.states[-1] if self.states else None


def validate(
    plan: Sequence[Step],
    domain: Domain,
    init: frozenset,
    goal: Formula,
    objects: Optional[Mapping[str, str]] = None,
) -> ValidationReport:
    """Replay ``plan`` from ``init`` re-instantiating every step from its schema.

    ``failed_step`` is the 0-based index of the first offending step, or
    ``len(plan)`` when every step applies but the goal is not reached.
    """
    constants = all_constants(domain, objects)
    state = frozenset(init)
    states = [state]
    for i, step in enumerate(plan):
        op, args = (step.operator, step.args) if isinstance(step, GroundAction) else step
        if op not in domain.schema_map:
            return ValidationReport(False, i, f"unknown operator {op}", states)
        try:
            action = instantiate(domain.schema(op), args, constants)
        except DomainError as exc:
            return ValidationReport(False, i, exc.message, states)
        bad = first_violation(state, action)
        if bad is not None:
            return ValidationReport(False, i, f"{action}: precondition {bad} does not hold", states)
        state = (state | action.add) - action.delete
        states.append(state)
    if not holds(state, goal, constants):
        return ValidationReport(False, len(plan), "goal not satisfied", states)
    return ValidationReport(True, None, "", states)
