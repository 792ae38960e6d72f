import math

import numpy as np
import pytest

from helpers import TV0_PLAN_MULTISET
from plantolearn.pddl import And, Atom, Domain, Not, Or, Predicate, ActionSchema, validate
from plantolearn.pddl.domain import PLAIN
from plantolearn.pddl.generators import random_problem
from plantolearn.planner import (
    PlanningProblem,
    SearchLimitExceeded,
    bfs_oracle,
    h_relaxed,
    plan,
)


def chain_domain():
    p, q, r = (Predicate(n, 0, PLAIN) for n in "pqr")
    a = ActionSchema("a", (), And((Atom("p", ()),)), frozenset({Atom("q", ())}))
    b = ActionSchema("b", (), And((Atom("q", ()),)), frozenset({Atom("r", ())}), frozenset({Atom("p", ())}))
    return Domain("chain", (p, q, r), (a, b))


def test_goal_already_true():
    d = chain_domain()
    pp = PlanningProblem(d, (), frozenset({Atom("p", ())}), And((Atom("p", ()),)))
    assert plan(pp).plan == []
    assert bfs_oracle(pp) == []


def test_two_step_chain():
    d = chain_domain()
    pp = PlanningProblem(d, (), frozenset({Atom("p", ())}), And((Atom("r", ()),)))
    assert [str(a) for a in plan(pp).plan] == ["(a)", "(b)"]


def test_negative_goal_needs_delete():
    d = chain_domain()
    pp = PlanningProblem(d, (), frozenset({Atom("p", ())}), And((Not(Atom("p", ())),)))
    assert [str(a) for a in plan(pp).plan] == ["(a)", "(b)"]


def test_disjunctive_goal_takes_cheaper_branch():
    d = chain_domain()
    goal = And((Or((Atom("r", ()), Atom("q", ()))),))
    pp = PlanningProblem(d, (), frozenset({Atom("p", ())}), goal)
    assert [str(a) for a in plan(pp).plan] == ["(a)"]


def test_h_relaxed_values():
    d = chain_domain()
    acts = PlanningProblem(d, (), frozenset(), And(())).ground()
    s = frozenset({Atom("p", ())})
    assert h_relaxed(s, And((Atom("p", ()),)), acts) == 0
    assert h_relaxed(s, And((Atom("r", ()),)), acts) == 2
    assert math.isinf(h_relaxed(frozenset(), And((Atom("r", ()),)), acts))


def test_tv0_plan(tv_ext, tv0_problem, tv0):
    result = plan(tv0)
    assert sorted(str(a) for a in result.plan) == TV0_PLAN_MULTISET
    rep = validate(result.plan, tv_ext, tv0_problem.init, tv0_problem.goal, dict(tv0_problem.objects))
    assert rep.valid
    assert len(bfs_oracle(tv0)) == 6


def test_deterministic(tv0):
    a, b = plan(tv0), plan(tv0)
    assert [str(x) for x in a.plan] == [str(x) for x in b.plan]
    assert a.stats.to_dict() == b.stats.to_dict()


def test_budget_exhaustion_raises(tv0):
    with pytest.raises(SearchLimitExceeded) as err:
        plan(tv0, node_budget=1)
    assert err.value.stats.expanded >= 1


def test_stats_are_consistent(tv0):
    st = plan(tv0).stats
    assert 0 < st.expanded <= st.generated


@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_oracle(seed):
    domain, problem = random_problem(np.random.default_rng(seed))
    pp = PlanningProblem.from_problem(domain, problem)
    oracle = bfs_oracle(pp)
    result = plan(pp)
    assert (oracle is None) == (result.plan is None)
    if oracle is not None:
        rep = validate(result.plan, domain, problem.init, problem.goal, dict(problem.objects))
        assert rep.valid
        assert len(result.plan) >= len(oracle)
    h = h_relaxed(problem.init, problem.goal, pp.ground(), pp.constants)
    # an infinite estimate is a proof of unsolvability
    if math.isinf(h):
        assert oracle is None
    if oracle:
        assert h >= 1
