"""Plan, act and observe until every property classifier is trained.

The loop keeps a symbolic state ``s`` over the constants it has anchored.
Each iteration it takes the first action of the current plan, applies the
action's schema effects to ``s``, executes it in the world, rebuilds ``s``
from perception and bookkeeping, and replans.

State reconstruction keeps ``Known``, ``Viewed`` and the base property
atoms from the predicted state. Type, ``Discovered`` and closeness atoms
come from the anchors. ``Sufficient_Obs``, ``Learned`` and ``Explored_for``
are decided by execution monitors.
"""
from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import IO, Optional, Sequence

from .learning_domain import (
    DISCOVERED,
    EXPLORE_FOR,
    EXPLORED_FOR,
    KNOWN,
    LEARNED,
    OBSERVE,
    SUFFICIENT_OBS,
    TRAIN,
    VIEWED,
    TypePropertyPair,
    build_goal,
    extend,
    reified,
    resolve_pairs,
    unreify,
)
from .perception import (
    AnchorStore,
    EmptyTrainingSetError,
    PropertyClassifier,
    Sample,
    TrainingSet,
    classifier_train,
)
from .planner import PlanningProblem, SearchLimitExceeded, plan as find_plan
from .pddl import Atom, Domain, GroundAction, apply
from .pddl.semantics import first_violation
from .simenv import DIRECTIONS, GTD, HEADING_OF, Act, Move, Rotate, StepResult, World, heading_towards

GOAL_LEARNED = "goal-learned"
EXPLORED_EXHAUSTED = "explored-exhausted"
BUDGET = "budget"
PLANNING_FAILED = "planning-failed"


@dataclass
class AgentConfig:
    n_min: int = 50
    views_per_observe: int = 8
    explore_step_cap: int = 50
    explore_budget: int = 1000
    max_iterations: int = 2000
    close_threshold: float = 1.5
    delta_pos: float = 0.5
    delta_feat: float = 0.6
    closeness_predicate: str = "Close_To"
    epochs: int = 10
    learning_rate: float = 1e-4
    threshold: float = 0.5
    warm_start: bool = True
    balance: bool = False
    planner_node_budget: int = 100_000
    # an object whose actions failed this often is dropped from the state
    max_failures: int = 2
    classifier_seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown agent config keys: {sorted(extra)}")
        cfg = cls(**d)
        if cfg.n_min < 1 or cfg.views_per_observe < 1 or cfg.max_iterations < 1:
            raise ValueError("n_min, views_per_observe and max_iterations must be positive")
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    trace: list = field(default_factory=list)
    replans: int = 0
    iterations: int = 0
    dataset_sizes: dict = field(default_factory=dict)
    learned: list = field(default_factory=list)
    constants: list = field(default_factory=list)
    termination: Optional[str] = None

    def terminate(self, reason: str) -> None:
        if self.termination is not None:
            raise RuntimeError("termination reason already set")
        self.termination = reason

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _sorted_atoms(atoms) -> list[str]:
    return sorted(str(a) for a in atoms)


class Agent:
    """One run of the learning loop in ``world`` under detection ``mode``."""

    def __init__(
        self,
        base_domain: Domain,
        pairs: Sequence,
        world: World,
        mode: str = GTD,
        config: Optional[AgentConfig] = None,
        trace_file: Optional[IO[str]] = None,
    ):
        self.config = config or AgentConfig()
        cfg = self.config
        self.pairs: list[TypePropertyPair] = resolve_pairs(base_domain, pairs)
        self.domain, self.extension = extend(base_domain, self.pairs, cfg.n_min, cfg.closeness_predicate)
        self.goal = build_goal(self.pairs)
        self.pair_keys = [(pr.type_name, pr.prop_name, pr.neg_prop_name) for pr in self.pairs]
        self.world = world
        self.mode = mode
        self.trace_file = trace_file
        self.report = RunReport()

        self.type_of_name = {reified(p.name): p.name for p in self._base_types()}
        self.prop_predicates = {p.name for p in self.domain.property_predicates}
        self.meta_constants = dict(self.domain.constant_types)
        self.anchors = AnchorStore(cfg.delta_pos, cfg.delta_feat)
        self.datasets: dict[tuple[str, str], TrainingSet] = {}
        for t, typ in self.meta_constants.items():
            if typ != "Type":
                continue
            for p, ptyp in self.meta_constants.items():
                if ptyp == "Property":
                    key = (unreify(t), unreify(p))
                    self.datasets[key] = TrainingSet(*key)
        self.models: dict[tuple[str, str, str], PropertyClassifier] = {}
        self.learned: set[tuple[str, str, str]] = set()
        self.explore_attempted: set[str] = set()
        # types whose latest Explore_for started exhausted and found nothing
        self.explore_futile: set[str] = set()
        self.explore_steps: dict[str, int] = {}
        self.seen: dict[tuple[int, int], bool] = {}
        self.iterations = 0
        self.state: frozenset = frozenset()
        self.plan: Optional[list[GroundAction]] = None
        self._last_new: list[str] = []
        # object the agent last approached; closeness is only reported for it
        self.engaged: Optional[str] = None
        self.failures: Counter = Counter()
        # anchors that keep failing, most likely misdetections
        self.distrusted: set[str] = set()

    def _base_types(self):
        return [p for p in self.domain.type_predicates if p.name not in ("Type", "Property")]

    # perception -------------------------------------------------------------

    def _perceive(self, percept) -> list[str]:
        self.seen.update(percept.visible)
        new = self.anchors.process(percept.detections)
        self._last_new.extend(new)
        return new

    def _low(self, op):
        if self._out_of_budget():
            return StepResult(False, None, "budget")
        res = self.world.step(op, self.mode)
        self.iterations += 1
        if not res.ok and isinstance(op, Move) and res.reason == "blocked":
            dx, dy = DIRECTIONS[op.direction]
            self.seen[(self.world.pose.x + dx, self.world.pose.y + dy)] = True
        self._perceive(res.percept)
        return res

    def _out_of_budget(self) -> bool:
        return self.iterations >= self.config.max_iterations

    # navigation -------------------------------------------------------------

    def _passable(self, c) -> bool:
        return self.world.in_bounds(c) and not self.seen.get(c, False)

    def _bfs(self, goals: set) -> Optional[list[str]]:
        """Shortest direction sequence to any goal cell, treating unseen cells as free."""
        start = self.world.pose.cell
        if start in goals:
            return []
        parent = {start: None}
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for d in ("E", "N", "W", "S"):
                dx, dy = DIRECTIONS[d]
                n = (c[0] + dx, c[1] + dy)
                if n in parent or not self._passable(n):
                    continue
                parent[n] = (c, d)
                if n in goals:
                    path = []
                    while parent[n] is not None:
                        n, step = parent[n]
                        path.append(step)
                    return path[::-1]
                queue.append(n)
        return None

    def _face(self, heading: int) -> None:
        delta = (heading - self.world.pose.heading) % 360
        if delta:
            self._low(Rotate(-90 if delta == 270 else delta))

    def _walk(self, direction: str) -> bool:
        self._face(HEADING_OF[direction])
        if self._out_of_budget():
            return False
        return self._low(Move(direction)).ok

    def _frontier(self) -> set:
        out = set()
        for c, occ in self.seen.items():
            if occ:
                continue
            for dx, dy in DIRECTIONS.values():
                n = (c[0] + dx, c[1] + dy)
                if self.world.in_bounds(n) and n not in self.seen:
                    out.add(c)
                    break
        return out

    def coverage_complete(self) -> bool:
        frontier = self._frontier()
        return not frontier or self._bfs(frontier) is None

    def go_close_to(self, constant: str, max_steps: int = 200) -> bool:
        anchor = self.anchors.anchors[constant]
        target = anchor.position
        for _ in range(max_steps):
            if self.world.distance(target) <= self.config.close_threshold:
                self._face(heading_towards(self.world.pose.cell, target))
                self.engaged = constant
                return True
            if self._out_of_budget():
                return False
            goals = set()
            for dx, dy in DIRECTIONS.values():
                n = (target[0] + dx, target[1] + dy)
                if self._passable(n):
                    goals.add(n)
            path = self._bfs(goals)
            if not path:
                return False
            self._walk(path[0])
        return False

    def leave(self, constant: str, max_steps: int = 50) -> bool:
        """Walk to the nearest seen free cell out of range of ``constant``."""
        thr = self.config.close_threshold
        target = self.anchors.anchors[constant].position
        free = {c for c, occ in self.seen.items() if not occ and math.dist(c, target) > thr}
        path = self._bfs(free) if free else None
        if path is None:
            return False
        for d in path[:max_steps]:
            if self._out_of_budget() or not self._walk(d):
                break
        if self.world.distance(target) > thr:
            self.engaged = None
            return True
        return False

    def explore(self, type_name: str) -> bool:
        """Frontier exploration until a new object of ``type_name`` shows up."""
        cap = self.config.explore_step_cap
        start = self.iterations
        predicate = self.type_of_name[type_name]
        self._last_new = []
        while self.iterations - start < cap and not self._out_of_budget():
            if any(self.anchors.anchors[c].type == predicate for c in self._last_new):
                break
            frontier = self._frontier()
            path = self._bfs(frontier) if frontier else None
            if path is None:
                break
            if not path:
                here = self.world.pose.cell
                unseen = [
                    d for d in ("E", "N", "W", "S")
                    if self.world.in_bounds((here[0] + DIRECTIONS[d][0], here[1] + DIRECTIONS[d][1]))
                    and (here[0] + DIRECTIONS[d][0], here[1] + DIRECTIONS[d][1]) not in self.seen
                ]
                self._face(HEADING_OF[unseen[0]])
            else:
                self._walk(path[0])
        self.explore_steps[type_name] = self.explore_steps.get(type_name, 0) + self.iterations - start
        return True

    # symbolic execution -----------------------------------------------------

    def _act(self, action: GroundAction) -> bool:
        target = action.args[0] if action.args else None
        if target not in self.anchors.anchors:
            return True
        pos = self.anchors.anchors[target].position
        return self._low(Act(pos, action.operator)).ok

    def observe(self, constant: str, t: str, p: str) -> bool:
        anchor = self.anchors.anchors[constant]
        self._face(heading_towards(self.world.pose.cell, anchor.position))
        k = self.config.views_per_observe
        if self.iterations + k > self.config.max_iterations:
            return False
        try:
            views = self.world.capture(anchor.position, k)
        except LookupError:
            return False
        step = self.iterations
        self.iterations += k
        # Known(o, t, p) is a precondition, so the label is the agent's belief
        # that p holds; ground truth is never consulted
        positive = not unreify(p).startswith("not_")
        ts = self.datasets[(unreify(t), unreify(p))]
        for i, v in enumerate(views):
            ts.add(Sample(tuple(float(x) for x in v), positive, constant, step + i))
        return True

    def train(self, t: str, p: str, q: str) -> bool:
        key = (t, p, q)
        model = self.models.get(key)
        if model is None:
            cfg = self.config
            model = self.models[key] = PropertyClassifier(
                epochs=cfg.epochs,
                learning_rate=cfg.learning_rate,
                threshold=cfg.threshold,
                warm_start=cfg.warm_start,
                balance=cfg.balance,
                random_state=cfg.classifier_seed,
            )
        try:
            classifier_train(model, self.datasets[(unreify(t), unreify(p))], self.datasets[(unreify(t), unreify(q))])
        except EmptyTrainingSetError:
            return False
        self.learned.add(key)
        return True

    def execute(self, action: GroundAction) -> bool:
        before = self.iterations
        op, args = action.operator, action.args
        if op == OBSERVE:
            ok = self.observe(*args)
        elif op == EXPLORE_FOR:
            t = args[0]
            was_exhausted = self._exploration_exhausted(t)
            self.explore_attempted.add(t)
            ok = self.explore(t)
            predicate = self.type_of_name[t]
            found = any(self.anchors.anchors[c].type == predicate for c in self._last_new)
            if was_exhausted and not found:
                self.explore_futile.add(t)
            else:
                self.explore_futile.discard(t)
        elif op == TRAIN:
            ok = self.train(*args)
        elif op == "Go_Close_To":
            ok = self.go_close_to(args[0])
        elif op == "Leave":
            ok = self.leave(args[0])
        else:
            ok = self._act(action)
        if self.iterations == before:
            self.iterations += 1
        return ok

    # state ------------------------------------------------------------------

    def objects(self) -> dict[str, str]:
        types = {p.name for p in self._base_types()}
        return {a.constant: a.type for a in self.anchors if a.type in types and a.constant not in self.distrusted}

    def _note_failure(self, action: GroundAction) -> None:
        self.failures[str(action)] += 1
        target = action.args[0] if action.args else None
        if target in self.anchors.anchors and self.failures[str(action)] >= self.config.max_failures:
            self.distrusted.add(target)
            if self.engaged == target:
                self.engaged = None

    def observe_state(self, predicted: frozenset = frozenset()) -> frozenset:
        persistent = {KNOWN, VIEWED} | self.prop_predicates
        objects = self.objects()
        atoms = {a for a in predicted if a.predicate in persistent and all(x in objects or x in self.meta_constants for x in a.args)}
        for c, typ in self.meta_constants.items():
            atoms.add(Atom(typ, (c,)))
        for c, typ in objects.items():
            atoms.add(Atom(typ, (c,)))
            atoms.add(Atom(DISCOVERED, (c, reified(typ))))
        if self.engaged in objects:
            if self.world.distance(self.anchors.anchors[self.engaged].position) <= self.config.close_threshold:
                atoms.add(Atom(self.config.closeness_predicate, (self.engaged,)))
        for (t, p), ts in self.datasets.items():
            if len(ts) >= self.config.n_min:
                atoms.add(Atom(SUFFICIENT_OBS, (reified(t), reified(p))))
        for key in self.learned:
            atoms.add(Atom(LEARNED, key))
        for t in sorted(self.explore_attempted):
            # exhausted means data is short and nothing is left to observe,
            # or a further exploration turned up nothing
            props = [x for tt, p, q in self.pair_keys if tt == t for x in (p, q)]
            starved = any(Atom(SUFFICIENT_OBS, (t, x)) not in atoms for x in props)
            pending = any(
                Atom(VIEWED, (c, t, x)) not in atoms
                for c, typ in objects.items()
                if reified(typ) == t
                for x in props
            )
            if starved and (t in self.explore_futile or not pending) and self._exploration_exhausted(t):
                atoms.add(Atom(EXPLORED_FOR, (t,)))
        return frozenset(atoms)

    def _exploration_exhausted(self, t: str) -> bool:
        return self.explore_steps.get(t, 0) >= self.config.explore_budget or self.coverage_complete()

    def replan(self) -> Optional[list[GroundAction]]:
        problem = PlanningProblem(self.domain, tuple(sorted(self.objects().items())), self.state, self.goal)
        try:
            result = find_plan(problem, node_budget=self.config.planner_node_budget)
        except SearchLimitExceeded:
            return None
        return result.plan

    # loop -------------------------------------------------------------------

    def _emit(self, record: dict) -> None:
        self.report.trace.append(record.get("action", record.get("event")))
        if self.trace_file is not None:
            self.trace_file.write(json.dumps(record, sort_keys=True) + "\n")

    def property_models(self) -> dict[tuple[str, str], PropertyClassifier]:
        """Trained classifiers keyed by (type predicate, property predicate)."""
        out = {}
        for pr in self.pairs:
            key = (pr.type_name, pr.prop_name, pr.neg_prop_name)
            if key in self.learned:
                out[(pr.type_predicate, pr.property_predicate)] = self.models[key]
        return out

    def train_sizes(self) -> dict[tuple[str, str], int]:
        """|T| per pair, counting both the property and its negation."""
        out = {}
        for pr in self.pairs:
            t = unreify(pr.type_name)
            out[(pr.type_predicate, pr.property_predicate)] = len(self.datasets[(t, unreify(pr.prop_name))]) + len(
                self.datasets[(t, unreify(pr.neg_prop_name))]
            )
        return out

    def dataset_sizes(self) -> dict[str, int]:
        return {f"{t}:{p}": len(ts) for (t, p), ts in sorted(self.datasets.items())}

    def run(self) -> RunReport:
        self._perceive(self.world.percept(self.mode))
        self.state = self.observe_state()
        self.plan = self.replan()
        self._emit({
            "event": "start",
            "iteration": 0,
            "constants": sorted(self.objects()),
            "plan": [str(a) for a in self.plan or []],
        })
        step = 0
        while True:
            if self.plan is None:
                self.report.terminate(PLANNING_FAILED)
                break
            if not self.plan:
                done = all(
                    Atom(LEARNED, (pr.type_name, pr.prop_name, pr.neg_prop_name)) in self.state for pr in self.pairs
                )
                self.report.terminate(GOAL_LEARNED if done else EXPLORED_EXHAUSTED)
                break
            if self._out_of_budget():
                self.report.terminate(BUDGET)
                break
            action = self.plan[0]
            assert first_violation(self.state, action) is None, f"{action} not applicable"
            predicted = apply(self.state, action)
            self._last_new = []
            ok = self.execute(action)
            if not ok:
                self._note_failure(action)
            new_constants = list(self._last_new)
            # a reported failure has no symbolic effect; monitors still refresh
            observed = self.observe_state(predicted if ok else self.state)
            self.state = observed
            self.plan = self.replan()
            self.report.replans += 1
            step += 1
            self._emit({
                "step": step,
                "iteration": self.iterations,
                "action": str(action),
                "ok": ok,
                "predicted_not_observed": _sorted_atoms(predicted - observed),
                "observed_not_predicted": _sorted_atoms(observed - predicted),
                "new_constants": new_constants,
                "datasets": self.dataset_sizes(),
                "plan": [str(a) for a in self.plan or []],
            })
        self.report.iterations = self.iterations
        self.report.dataset_sizes = self.dataset_sizes()
        self.report.learned = sorted(list(k) for k in self.learned)
        self.report.constants = sorted(self.objects())
        self._emit({"event": "end", "termination": self.report.termination, "iteration": self.iterations})
        return self.report


def run(
    base_domain: Domain,
    pairs: Sequence,
    world: World,
    mode: str = GTD,
    config: Optional[AgentConfig] = None,
    trace_file: Optional[IO[str]] = None,
) -> tuple[RunReport, Agent]:
    agent = Agent(base_domain, pairs, world, mode, config, trace_file)
    return agent.run(), agent
