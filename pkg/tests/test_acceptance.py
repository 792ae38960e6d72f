"""Acceptance suite: one PASS/FAIL line per criterion.

Each test records its verdict through ``record``; the lines are printed as
they happen (visible with ``-s``) and again in the terminal summary. Run
this file directly with ``python tests/test_acceptance.py`` for the lines
alone.
"""
import io
import json
import math
import sys
import time

import mpmath
import numpy as np
import pytest

from helpers import TV0_PLAN_MULTISET, structural_mismatches
from plantolearn import data_path
from plantolearn.agent import AgentConfig, run
from plantolearn.evalkit import evaluate_models, generate_testset, precision_recall, precision_recall_counts, weighted_average
from plantolearn.learning_domain import extend
from plantolearn.pddl import PreconditionError, apply, ground, holds, parse_domain, parse_problem, validate
from plantolearn.pddl.generators import random_problem
from plantolearn.pddl.grounding import all_constants, constants_of_type
from plantolearn.perception import logistic_loss_and_grad, sigmoid
from plantolearn.planner import PlanningProblem, bfs_oracle, plan
from plantolearn.simenv import WorldConfig, generate_world

RESULTS: dict[int, str] = {}

TV = [("Tv", "Is_Turned_On")]
HOUSEHOLD = [("Tv", "Is_Turned_On"), ("Laptop", "Is_Turned_On"), ("Box", "Is_Open"), ("Fridge", "Is_Open")]
MAX_ITERATIONS = 2000


def record(n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def domain(name):
    return parse_domain(data_path(name).read_text())


# 1 ----------------------------------------------------------------------------

def test_1_domain_extension_golden():
    start = time.monotonic()
    base = domain("tv_base.pddl")
    ext, _ = extend(base, TV)
    problems = structural_mismatches(base, ext)
    elapsed = time.monotonic() - start
    record(1, not problems and elapsed < 1, f"{len(problems)} structural mismatches, {elapsed:.2f}s")


# 2 ----------------------------------------------------------------------------

def test_2_worked_plan():
    start = time.monotonic()
    ext, _ = extend(domain("tv_base.pddl"), TV)
    problem = parse_problem(data_path("tv0_problem.pddl").read_text(), ext)
    task = PlanningProblem.from_problem(ext, problem)
    steps = plan(task).plan
    valid = validate(steps, ext, problem.init, problem.goal, dict(problem.objects)).valid
    same = sorted(str(a) for a in steps) == TV0_PLAN_MULTISET
    optimal = len(bfs_oracle(task))
    elapsed = time.monotonic() - start
    ok = valid and same and optimal == 6 and elapsed < 5
    record(2, ok, f"plan of {len(steps)} (valid={valid}, expected multiset={same}), oracle optimum {optimal}, {elapsed:.2f}s")


# 3 ----------------------------------------------------------------------------

def test_3_planner_oracle_agreement():
    start = time.monotonic()
    disagreements, invalid, solvable = [], [], 0
    for seed in range(100):
        d, p = random_problem(np.random.default_rng(seed))
        task = PlanningProblem.from_problem(d, p)
        oracle = bfs_oracle(task)
        found = plan(task).plan
        if (oracle is None) != (found is None):
            disagreements.append(seed)
        if found is not None:
            solvable += 1
            if not validate(found, d, p.init, p.goal, dict(p.objects)).valid:
                invalid.append(seed)
    elapsed = time.monotonic() - start
    ok = not disagreements and not invalid and elapsed < 60
    record(3, ok, f"{solvable}/100 solvable, disagreements {disagreements}, invalid {invalid}, {elapsed:.2f}s")


# 4 ----------------------------------------------------------------------------

def transition_and_grounding_ok(seed: int) -> bool:
    d, p = random_problem(np.random.default_rng(seed))
    objects = dict(p.objects)
    constants = all_constants(d, objects)
    acts = ground(d, objects)
    expected = sum(math.prod(len(constants_of_type(constants, t)) for _, t in s.params) for s in d.schemas)
    if len(acts) != expected or len({(a.operator, a.args) for a in acts}) != expected:
        return False
    for a in acts:
        if a.applicable(p.init) != holds(p.init, a.pre, constants):
            return False
        if a.applicable(p.init):
            t = apply(p.init, a)
            if t != (p.init | a.add) - a.delete or (a.delete & t) or not (a.add - a.delete) <= t:
                return False
        else:
            try:
                apply(p.init, a)
                return False
            except PreconditionError:
                pass
    return True


def test_4_transition_and_grounding_oracles():
    start = time.monotonic()
    failed = [seed for seed in range(1000) if not transition_and_grounding_ok(seed)]
    elapsed = time.monotonic() - start
    record(4, not failed and elapsed < 10, f"{1000 - len(failed)}/1000 instances consistent, {elapsed:.2f}s")


# 5 ----------------------------------------------------------------------------

def two_tv_trace():
    world = generate_world(WorldConfig(seed=0, width=6, height=6, population={"Tv": 2}, action_failure=0.0))
    buf = io.StringIO()
    run(domain("tv_base.pddl"), TV, world, "GTD", AgentConfig(n_min=16, epochs=50, learning_rate=0.05), buf)
    return buf.getvalue(), [json.loads(line) for line in buf.getvalue().splitlines()]


def test_5_replanning():
    text, records = two_tv_trace()
    steps = [r for r in records if "action" in r]
    actions = [r["action"] for r in steps]
    obs0 = "(Observe tv0 q_tv q_is_turned_on)"
    i = actions.index(obs0) if obs0 in actions else -1
    missed = i >= 0 and "(Sufficient_Obs q_tv q_is_turned_on)" in steps[i]["predicted_not_observed"]
    # the plan being followed when Observe ran, against the plan made right after it
    followed = (steps[i - 1] if i > 0 else records[0])["plan"] if i >= 0 else []
    replanned = i >= 0 and steps[i]["plan"] != followed[1:]
    later = [a for a in actions[i + 1 :] if a.startswith("(Observe tv1")] if i >= 0 else []
    deterministic = two_tv_trace()[0] == text
    ok = missed and replanned and bool(later) and deterministic
    record(5, ok, f"Observe(tv0) at step {i + 1}, Sufficient_Obs missed={missed}, replanned={replanned}, "
                  f"then {later[0] if later else 'no Observe(tv1)'}, deterministic={deterministic}")


# 6 ----------------------------------------------------------------------------

ITERATIONS_SEEN: list[int] = []


def test_6_end_to_end_learning():
    start = time.monotonic()
    base = domain("tv_base.pddl")
    results = []
    for seed in range(5):
        cfg = WorldConfig(seed=seed, population={"Tv": 3, "Box": 2}, action_failure=0.0, view_noise=0.1,
                          signal_strength=1.0)
        rep, agent = run(base, TV, generate_world(cfg), "GTD", AgentConfig(n_min=16, epochs=100, learning_rate=0.05))
        ITERATIONS_SEEN.append(rep.iterations)
        test = generate_testset(generate_world(cfg.replace(seed=seed + 1000)), TV, seed, 200)
        models = agent.property_models()
        pr = precision_recall(models[TV[0]], test[TV[0]]) if TV[0] in models else (0.0, 0.0)
        results.append(pr)
    elapsed = time.monotonic() - start
    worst_p = min(p for p, _ in results)
    worst_r = min(r for _, r in results)
    ok = worst_p >= 0.9 and worst_r >= 0.9 and elapsed < 300
    record(6, ok, f"5 seeds, min precision {worst_p:.3f}, min recall {worst_r:.3f}, {elapsed:.1f}s")


# 7 ----------------------------------------------------------------------------

HOUSEHOLD_CONFIG = AgentConfig(n_min=24, epochs=100, learning_rate=0.05)


@pytest.mark.slow
def test_7_nd_vs_gtd():
    start = time.monotonic()
    base = domain("household_base.pddl")
    world_cfg = WorldConfig.from_json(data_path("configs/household_world.json"))
    means = {"ND": [], "GTD": []}
    for seed in range(10):
        cfg = world_cfg.replace(seed=seed)
        test = generate_testset(generate_world(cfg.replace(seed=seed + 1000)), HOUSEHOLD, seed, 100)
        for mode in means:
            rep, agent = run(base, HOUSEHOLD, generate_world(cfg), mode, HOUSEHOLD_CONFIG)
            ITERATIONS_SEEN.append(rep.iterations)
            rows = evaluate_models(agent.property_models(), test, agent.train_sizes(), mode)
            p, _ = weighted_average(rows)
            means[mode].append(0.0 if p is None else p)
    nd, gtd = float(np.mean(means["ND"])), float(np.mean(means["GTD"]))
    elapsed = time.monotonic() - start
    ok = gtd >= nd - 0.02 and elapsed < 900
    record(7, ok, f"mean weighted precision GTD {gtd:.3f} vs ND {nd:.3f} over 10 seeds, {elapsed:.1f}s")


# 8 ----------------------------------------------------------------------------

def test_8_numerical_checks():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(1, 30)), int(rng.integers(1, 8))
        X = rng.standard_normal((n, d))
        y = rng.random(n) < 0.5
        w, b = rng.standard_normal(d), float(rng.standard_normal())
        _, gw, gb = logistic_loss_and_grad(w, b, X, y)
        eps = 1e-6

        def loss(dw, db):
            return logistic_loss_and_grad(w + dw, b + db, X, y)[0]

        num = [(loss(e, 0) - loss(-e, 0)) / (2 * eps) for e in np.eye(d) * eps]
        num.append((loss(0, eps) - loss(0, -eps)) / (2 * eps))
        num = np.array(num)
        rel = np.abs(np.append(gw, gb) - num) / np.maximum(np.abs(num), 1e-3)
        worst = max(worst, float(rel.max()))
    mpmath.mp.dps = 50
    zs = np.concatenate([rng.uniform(-50, 50, 1000), [-745.0, -30.0, 0.0, 30.0, 745.0]])
    sig_err = max(
        abs(float(g) - float(1 / (1 + mpmath.exp(-mpmath.mpf(float(z)))))) for z, g in zip(zs, sigmoid(zs))
    )
    ok = worst < 1e-5 and sig_err <= 1e-12
    record(8, ok, f"max gradient relative error {worst:.2e}, max sigmoid error {sig_err:.2e}")


# 9 ----------------------------------------------------------------------------

def test_9_metrics_arithmetic():
    cases = {
        (8, 2, 2): (0.8, 0.8),
        (3, 1, 0): (0.75, 1.0),
        (1, 0, 3): (1.0, 0.25),
        (5, 5, 15): (0.5, 0.25),
        (0, 0, 7): (0.0, 0.0),  # nothing predicted positive, as for the bottle
        (0, 0, 0): (0.0, 0.0),
        (0, 4, 2): (0.0, 0.0),
    }
    wrong = {k: precision_recall_counts(*k) for k, v in cases.items() if precision_recall_counts(*k) != v}
    record(9, not wrong, f"{len(cases) - len(wrong)}/{len(cases)} fixed confusion counts exact")


# 10 ---------------------------------------------------------------------------

def test_10_termination_and_determinism():
    base = domain("household_base.pddl")
    world_cfg = WorldConfig.from_json(data_path("configs/household_world.json"))
    identical = True
    for seed, mode in ((0, "GTD"), (1, "ND"), (2, "ND")):
        texts = []
        for _ in range(2):
            buf = io.StringIO()
            rep, _ = run(base, HOUSEHOLD, generate_world(world_cfg.replace(seed=seed)), mode, HOUSEHOLD_CONFIG, buf)
            ITERATIONS_SEEN.append(rep.iterations)
            texts.append(buf.getvalue() + rep.to_json())
        identical &= texts[0] == texts[1]
    longest = max(ITERATIONS_SEEN)
    ok = identical and longest <= MAX_ITERATIONS
    record(10, ok, f"{len(ITERATIONS_SEEN)} runs, longest {longest} iterations (budget {MAX_ITERATIONS}), "
                   f"reruns byte-identical={identical}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
