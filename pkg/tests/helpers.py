"""Hand-written expectations shared by the unit and acceptance suites."""
from plantolearn.pddl import Atom, Forall, Imply, Not
from plantolearn.pddl.formulas import conjuncts

TV0_PLAN_MULTISET = sorted([
    "(Go_Close_To tv0)",
    "(Turn_On tv0)",
    "(Observe tv0 q_tv q_is_turned_on)",
    "(Turn_Off tv0)",
    "(Observe tv0 q_tv q_not_is_turned_on)",
    "(Train q_tv q_is_turned_on q_not_is_turned_on)",
])


def A(pred, *args):
    return Atom(pred, tuple(args))


# learning operators written out by hand, with schema variables as named there
LEARNING_TABLE = {
    "Observe": {
        "params": (("?o", "object"), ("?t", "Type"), ("?p", "Property")),
        "pre": {Not(A("Viewed", "?o", "?t", "?p")), A("Close_To", "?o"), A("Known", "?o", "?t", "?p")},
        "add": {A("Sufficient_Obs", "?t", "?p"), A("Viewed", "?o", "?t", "?p")},
        "del": set(),
    },
    "Explore_for": {
        "params": (("?t", "Type"), ("?p", "Property")),
        "pre": {
            Forall((("?x", "object"),), Imply(A("Discovered", "?x", "?t"), A("Viewed", "?x", "?t", "?p"))),
            Not(A("Sufficient_Obs", "?t", "?p")),
        },
        "add": {A("Explored_for", "?t")},
        "del": set(),
    },
    "Train": {
        "params": (("?t", "Type"), ("?p", "Property"), ("?q", "Property")),
        "pre": {A("Sufficient_Obs", "?t", "?p"), A("Sufficient_Obs", "?t", "?q")},
        "add": {A("Learned", "?t", "?p", "?q")},
        "del": set(),
    },
}

KNOWN_AUGMENTATION = {
    "Turn_On": {
        "add": {A("Known", "?x", "q_tv", "q_is_turned_on")},
        "del": {A("Known", "?x", "q_tv", "q_not_is_turned_on")},
    },
    "Turn_Off": {
        "add": {A("Known", "?x", "q_tv", "q_not_is_turned_on")},
        "del": {A("Known", "?x", "q_tv", "q_is_turned_on")},
    },
}


def structural_mismatches(base, ext) -> list[str]:
    """Differences between ``ext`` and the hand-written expectation; empty if none."""
    problems = []
    for name, want in LEARNING_TABLE.items():
        if name not in ext.schema_map:
            problems.append(f"missing {name}")
            continue
        s = ext.schema(name)
        got = {"params": s.params, "pre": set(conjuncts(s.pre)), "add": set(s.eff_add), "del": set(s.eff_del)}
        for key in want:
            if got[key] != want[key]:
                problems.append(f"{name}.{key}: {got[key]} != {want[key]}")
    for s in base.schemas:
        e = ext.schema(s.name)
        extra = KNOWN_AUGMENTATION.get(s.name, {"add": set(), "del": set()})
        if set(e.eff_add) != set(s.eff_add) | extra["add"]:
            problems.append(f"{s.name}.add")
        if set(e.eff_del) != set(s.eff_del) | extra["del"]:
            problems.append(f"{s.name}.del")
        if e.pre != s.pre or e.params != s.params:
            problems.append(f"{s.name} precondition or parameters changed")
    want_schemas = {s.name for s in base.schemas} | set(LEARNING_TABLE)
    if {s.name for s in ext.schemas} != want_schemas:
        problems.append("unexpected schema set")
    return problems
