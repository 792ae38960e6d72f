from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import structural_mismatches
from plantolearn import data_path
from plantolearn.learning_domain import (
    AlreadyExtendedError,
    ExtensionError,
    LearningDomainExtender,
    build_goal,
    extend,
    reify_names,
)
from plantolearn.pddl import And, Atom, Or, apply, ground, parse_domain, print_domain

GOLDEN = Path(__file__).parent / "golden"
TV = [("Tv", "Is_Turned_On")]
# module-level copies for the hypothesis tests, which cannot take fixtures
TV_BASE = parse_domain(data_path("tv_base.pddl").read_text())
TV_EXT = extend(TV_BASE, TV)[0]


def test_matches_hand_written_operators(tv_base, tv_ext):
    assert structural_mismatches(tv_base, tv_ext) == []


def test_reified_constants(tv_base):
    d = reify_names(tv_base)
    # one per type plus a positive and a negated name per property
    assert sorted(d.constant_types.items()) == [
        ("q_box", "Type"),
        ("q_is_turned_on", "Property"),
        ("q_not_is_turned_on", "Property"),
        ("q_tv", "Type"),
    ]


def test_golden_domain_and_report(tv_base):
    ext, report = extend(tv_base, TV)
    assert print_domain(ext) == (GOLDEN / "tv_extended.pddl").read_text()
    assert report.to_json() == (GOLDEN / "tv_extended.report.json").read_text()
    assert set(report.modified_schemas) == {"Turn_On", "Turn_Off"}


def test_output_is_byte_identical(tv_base):
    assert print_domain(extend(tv_base, TV)[0]) == print_domain(extend(tv_base, TV)[0])


def test_extending_twice_fails(tv_ext):
    with pytest.raises(AlreadyExtendedError):
        extend(tv_ext, TV)


def test_goal_structure(tv_base):
    goal = build_goal(extend(tv_base, TV)[1].pairs)
    assert goal == And(
        (Or((Atom("Learned", ("q_tv", "q_is_turned_on", "q_not_is_turned_on")), Atom("Explored_for", ("q_tv",)))),)
    )


def test_unlearnable_pair_rejected(tv_base):
    with pytest.raises(ExtensionError, match="not learnable"):
        extend(tv_base, [("Box", "Is_Turned_On")])
    with pytest.raises(ExtensionError, match="unknown type"):
        extend(tv_base, [("Chair", "Is_Turned_On")])


def test_pair_names_are_case_insensitive(tv_base):
    a = print_domain(extend(tv_base, [("tv", "is_turned_on")])[0])
    b = print_domain(extend(tv_base, [("q_tv", "q_is_turned_on")])[0])
    assert a == b


def test_household_pairs(household_base):
    pairs = [("Tv", "Is_Turned_On"), ("Laptop", "Is_Turned_On"), ("Box", "Is_Open"), ("Fridge", "Is_Open")]
    ext, report = extend(household_base, pairs)
    assert len(report.pairs) == 4
    assert len(build_goal(report.pairs).items) == 4
    assert set(report.modified_schemas) == {
        "Close_Box",
        "Close_Fridge",
        "Open_Box",
        "Open_Fridge",
        "Turn_Off_Laptop",
        "Turn_Off_Tv",
        "Turn_On_Laptop",
        "Turn_On_Tv",
    }


def test_transformer_api(tv_base):
    tr = LearningDomainExtender(pairs=TV, n_min=16)
    ext = tr.fit_transform(tv_base)
    assert print_domain(ext) == print_domain(extend(tv_base, TV, n_min=16)[0])
    assert tr.get_params()["n_min"] == 16
    assert tr.report_.n_min == 16
    assert len(tr.goal().items) == 1


def _random_walk(domain, objects, state, rng, n):
    acts = ground(domain, objects)
    trace = [state]
    for _ in range(n):
        options = [a for a in acts if a.applicable(state)]
        if not options:
            break
        state = apply(state, options[int(rng.integers(len(options)))])
        trace.append(state)
    return trace


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_known_is_never_both_polarities(seed):
    objects = {"tv0": "Tv", "tv1": "Tv", "box0": "Box"}
    init = frozenset({Atom("Tv", ("tv0",)), Atom("Tv", ("tv1",)), Atom("Box", ("box0",))})
    for s in _random_walk(TV_EXT, objects, init, np.random.default_rng(seed), 30):
        for o in ("tv0", "tv1"):
            yes = Atom("Known", (o, "q_tv", "q_is_turned_on"))
            no = Atom("Known", (o, "q_tv", "q_not_is_turned_on"))
            assert not (yes in s and no in s)
            on = Atom("Is_Turned_On", (o,)) in s
            # once known, the Known atom agrees with the property
            assert not (yes in s and not on) and not (no in s and on)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_base_semantics_preserved(seed):
    base, ext = TV_BASE, TV_EXT
    objects = {"tv0": "Tv", "box0": "Box"}
    base_preds = {p.name for p in base.predicates}
    init = frozenset({Atom("Tv", ("tv0",)), Atom("Box", ("box0",))})
    rng = np.random.default_rng(seed)
    ext_acts = {(a.operator, a.args): a for a in ground(ext, objects)}
    state = init
    for _ in range(20):
        options = [a for a in ground(base, objects) if a.applicable(state)]
        a = options[int(rng.integers(len(options)))]
        e = ext_acts[(a.operator, a.args)]
        assert e.applicable(state)
        assert {x for x in apply(state, e) if x.predicate in base_preds} == apply(state, a)
        state = apply(state, a)
