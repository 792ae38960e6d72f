"""Forward state-space planning over grounded problems.

:func:`plan` runs greedy best-first search with deferred heuristic
evaluation and FIFO tie-breaking, guided by an FF-style relaxed-plan
heuristic.  If the greedy phase spends its share of the node budget it
restarts with A* on the same heuristic.  :func:`bfs_oracle` is a plain
breadth-first search over explicit states used to cross-check results.

Internally states are integer bitmasks over an atom index.
"""
from __future__ import annotations

import heapq
import itertools
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .pddl import (
    And,
    Atom,
    Domain,
    DomainError,
    Forall,
    Formula,
    GroundAction,
    Imply,
    Not,
    Or,
    Problem,
    all_constants,
    ground,
    holds,
)
from .pddl.grounding import expand_forall

INF = float("inf")


class SearchLimitExceeded(RuntimeError):
    """The node or time budget ran out before the search concluded."""

    def __init__(self, message: str, stats: "SearchStats"):
        super().__init__(message)
        self.stats = stats


class OracleBoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class PlanningProblem:
    domain: Domain
    objects: tuple[tuple[str, str], ...] = ()
    init: frozenset = frozenset()
    goal: Formula = And(())

    @classmethod
    def from_problem(cls, domain: Domain, problem: Problem) -> "PlanningProblem":
        return cls(domain, problem.objects, problem.init, problem.goal)

    @property
    def constants(self) -> dict[str, str]:
        return all_constants(self.domain, dict(self.objects))

    def ground(self) -> list[GroundAction]:
        return ground(self.domain, dict(self.objects))


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    evaluations: int = 0
    algorithm: str = "gbfs"
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "algorithm": self.algorithm,
            "expanded": self.expanded,
            "generated": self.generated,
            "evaluations": self.evaluations,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class SearchResult:
    plan: Optional[list[GroundAction]]
    stats: SearchStats

    @property
    def solved(self) -> bool:
        return self.plan is not None


# ---------------------------------------------------------------------------
# goal normal form


def _dnf(f: Formula, constants: Mapping[str, str], negate: bool = False) -> list[tuple[frozenset, frozenset]]:
    """Disjunction of (positive, negative) literal sets equivalent to ``f``."""
    if isinstance(f, Atom):
        return [(frozenset(), frozenset({f}))] if negate else [(frozenset({f}), frozenset())]
    if isinstance(f, Not):
        return _dnf(f.arg, constants, not negate)
    if isinstance(f, Imply):
        return _dnf(Or((Not(f.antecedent), f.consequent)), constants, negate)
    if isinstance(f, Forall):
        return _dnf(And(tuple(expand_forall(f, constants))), constants, negate)
    if isinstance(f, (And, Or)):
        conjunctive = isinstance(f, And) != negate
        parts = [_dnf(i, constants, negate) for i in f.items]
        if not conjunctive:
            return [t for p in parts for t in p]
        terms = [(frozenset(), frozenset())]
        for p in parts:
            terms = [(a[0] | b[0], a[1] | b[1]) for a in terms for b in p]
            terms = [t for t in terms if t[0].isdisjoint(t[1])]
        return terms
    raise TypeError(f"not a formula: {f!r}")


def goal_clauses(goal: Formula, constants: Mapping[str, str]) -> list[list[tuple[frozenset, frozenset]]]:
    """Conjunction of clauses; each clause is a disjunction of literal terms."""
    items = goal.items if isinstance(goal, And) else (goal,)
    clauses = []
    for item in items:
        if isinstance(item, And):
            clauses.extend(goal_clauses(item, constants))
        else:
            clauses.append(_dnf(item, constants))
    return clauses


# ---------------------------------------------------------------------------
# compiled task


class _Task:
    """Bitmask encoding of a grounded problem plus the relaxed-plan heuristic.

    Each goal clause gets a synthetic atom and one artificial action per
    disjunct achieving it; the heuristic then targets the synthetic atoms.
    """

    def __init__(self, actions: Sequence[GroundAction], init: frozenset, goal: Formula, constants):
        self.clauses = goal_clauses(goal, constants)
        index: dict[Atom, int] = {}

        def idx(a: Atom) -> int:
            i = index.get(a)
            if i is None:
                i = index[a] = len(index)
            return i

        def mask(atoms: Iterable[Atom]) -> int:
            m = 0
            for a in atoms:
                m |= 1 << idx(a)
            return m

        for a in sorted(init, key=str):
            idx(a)
        self.init = mask(init)
        # drop actions whose positive preconditions are relaxed-unreachable
        reach = set(init)
        pending = list(actions)
        while True:
            still = [a for a in pending if not a.pos <= reach]
            if len(still) == len(pending):
                break
            for a in pending:
                if a.pos <= reach:
                    reach |= a.add
            pending = still
        dropped = set(map(id, pending))
        self.actions = [a for a in actions if id(a) not in dropped]

        self.pre_pos, self.pre_neg, self.imps, self.add, self.dele = [], [], [], [], []
        self.pre_lists: list[list[int]] = []
        for a in self.actions:
            self.pre_pos.append(mask(a.pos))
            self.pre_neg.append(mask(a.neg))
            self.imps.append(
                tuple((mask(i.ante_pos), mask(i.ante_neg), mask(i.cons_pos), mask(i.cons_neg)) for i in a.implications)
            )
            self.add.append(mask(a.add))
            self.dele.append(mask(a.delete))
            self.pre_lists.append(sorted(index[x] for x in a.pos))
        self.goal_terms = [[(mask(p), mask(n)) for p, n in clause] for clause in self.clauses]

        # Relaxed graph. A negative literal becomes a "negation atom" that
        # holds initially when the atom is absent and is added by every
        # deleter of the atom. Beyond the real actions there are artificial
        # actions that reach one atom per goal clause, plus one "holds" atom
        # per implication precondition. The holds atom is reached once the
        # antecedent can be falsified or the consequent made true.
        self.n_real = len(self.actions)
        for a in self.actions:
            for x in a.neg:
                idx(x)
            for imp in a.implications:
                for x in itertools.chain(imp.ante_pos, imp.ante_neg, imp.cons_pos, imp.cons_neg):
                    idx(x)
        for clause in self.clauses:
            for pos, negs in clause:
                for x in itertools.chain(pos, negs):
                    idx(x)
        fresh = itertools.count(len(index))
        neg_atom: dict[int, int] = {}

        def neg(i: int) -> int:
            if i not in neg_atom:
                neg_atom[i] = next(fresh)
            return neg_atom[i]

        r_pre = [list(p) + [neg(index[x]) for x in sorted(a.neg, key=str)] for p, a in zip(self.pre_lists, self.actions)]
        r_add = [[index[x] for x in sorted(a.add, key=str)] for a in self.actions]
        self.goal_atoms = []
        for clause in self.clauses:
            g = next(fresh)
            self.goal_atoms.append(g)
            for pos, negs in clause:
                r_pre.append(sorted([index[x] for x in pos] + [neg(index[x]) for x in negs]))
                r_add.append([g])
        holds_atom: dict = {}
        for k, a in enumerate(self.actions):
            for imp in a.implications:
                h = holds_atom.get(imp)
                if h is None:
                    h = holds_atom[imp] = next(fresh)
                    for x in sorted(imp.ante_pos, key=str):
                        r_pre.append([neg(index[x])])
                        r_add.append([h])
                    for x in sorted(imp.ante_neg, key=str):
                        r_pre.append([index[x]])
                        r_add.append([h])
                    cons = [index[x] for x in imp.cons_pos] + [neg(index[x]) for x in imp.cons_neg]
                    r_pre.append(sorted(cons))
                    r_add.append([h])
                r_pre[k].append(h)
        for k, a in enumerate(self.actions):
            for x in a.delete:
                i = index.get(x)
                if i is not None and i in neg_atom:
                    r_add[k].append(neg_atom[i])
        self.neg_pairs = sorted(neg_atom.items())
        self.n_atoms = next(fresh)
        self.r_pre = r_pre
        self.r_add = r_add
        self.precond_of: list[list[int]] = [[] for _ in range(self.n_atoms)]
        for k, pre in enumerate(r_pre):
            for x in pre:
                self.precond_of[x].append(k)
        self.no_pre = [k for k, pre in enumerate(r_pre) if not pre]

    def applicable(self, s: int, k: int) -> bool:
        pos = self.pre_pos[k]
        if s & pos != pos or s & self.pre_neg[k]:
            return False
        for ap, an, cp, cn in self.imps[k]:
            if s & ap == ap and not s & an:
                if s & cp != cp or s & cn:
                    return False
        return True

    def successors(self, s: int):
        for k in range(self.n_real):
            if self.applicable(s, k):
                yield k, (s | self.add[k]) & ~self.dele[k]

    def is_goal(self, s: int) -> bool:
        for clause in self.goal_terms:
            if not any(s & p == p and not s & n for p, n in clause):
                return False
        return True

    def h_ff(self, s: int) -> float:
        """Size of a relaxed plan from ``s``; 0 only in goal states."""
        return self.h_ff_helpful(s)[0]

    def h_ff_helpful(self, s: int) -> tuple[float, frozenset]:
        """``h_ff`` plus the relaxed-plan actions applicable in ``s``."""
        if self.is_goal(s):
            return 0, frozenset()
        level = [-1] * self.n_atoms
        supporter = [-1] * self.n_atoms
        counter = [len(p) for p in self.r_pre]
        frontier = []
        x = s
        while x:
            low = x & -x
            b = low.bit_length() - 1
            if b < self.n_atoms:
                level[b] = 0
                frontier.append(b)
            x ^= low
        for i, n in self.neg_pairs:
            if not s >> i & 1:
                level[n] = 0
                frontier.append(n)
        ready = list(self.no_pre)
        for b in frontier:
            for k in self.precond_of[b]:
                counter[k] -= 1
                if counter[k] == 0:
                    ready.append(k)
        layer = 0
        remaining = set(self.goal_atoms)
        while ready and remaining:
            layer += 1
            new_atoms = []
            for k in sorted(set(ready)):
                for a in self.r_add[k]:
                    if level[a] < 0:
                        level[a] = layer
                        supporter[a] = k
                        new_atoms.append(a)
            ready = []
            for a in new_atoms:
                remaining.discard(a)
                for k in self.precond_of[a]:
                    counter[k] -= 1
                    if counter[k] == 0:
                        ready.append(k)
        if remaining:
            return INF, frozenset()
        chosen: set[int] = set()
        stack = list(self.goal_atoms)
        seen: set[int] = set()
        while stack:
            a = stack.pop()
            if a in seen or level[a] == 0:
                continue
            seen.add(a)
            k = supporter[a]
            if k not in chosen:
                chosen.add(k)
                stack.extend(self.r_pre[k])
        real = [k for k in chosen if k < self.n_real]
        helpful = frozenset(k for k in real if self.applicable(s, k))
        return max(len(real), 1), helpful


# ---------------------------------------------------------------------------
# search


def _extract(parents: dict, s: int, task: _Task) -> list[GroundAction]:
    steps = []
    while True:
        parent, k = parents[s]
        if parent is None:
            break
        steps.append(task.actions[k])
        s = parent
    steps.reverse()
    return steps


PREFERRED_BOOST = 1000


def _gbfs(task: _Task, stats: SearchStats, budget: int, deadline: Optional[float]):
    """Lazy greedy best-first search with a second queue for successors
    reached by helpful actions. The queues alternate; every new best h grants
    the helpful queue ``PREFERRED_BOOST`` extra turns.

    Returns a plan, ``None`` (exhausted) or ``False`` (budget spent).
    """
    counter = itertools.count()
    parents = {task.init: (None, -1)}
    stats.generated += 1
    if task.is_goal(task.init):
        return []
    queues: tuple[list, list] = ([(0, next(counter), task.init)], [])
    closed: set[int] = set()
    best = INF
    boost = 0
    turn = 0
    while queues[0] or queues[1]:
        if boost > 0 and queues[1]:
            q = queues[1]
            boost -= 1
        else:
            turn ^= 1
            q = queues[turn] if queues[turn] else queues[1 - turn]
        _, _, s = heapq.heappop(q)
        if s in closed:
            continue
        closed.add(s)
        h, helpful = task.h_ff_helpful(s)
        stats.evaluations += 1
        if h == INF:
            continue
        if stats.expanded >= budget or (deadline is not None and time.monotonic() > deadline):
            return False
        stats.expanded += 1
        if h < best:
            best = h
            boost += PREFERRED_BOOST
        for k, t in task.successors(s):
            if t in parents:
                continue
            stats.generated += 1
            parents[t] = (s, k)
            if task.is_goal(t):
                return _extract(parents, t, task)
            entry = (h, next(counter), t)
            heapq.heappush(queues[0], entry)
            if k in helpful:
                heapq.heappush(queues[1], entry)
    return None


def _astar(task: _Task, stats: SearchStats, budget: int, deadline: Optional[float]):
    counter = itertools.count()
    g_best = {task.init: 0}
    parents = {task.init: (None, -1)}
    stats.generated += 1
    h0 = task.h_ff(task.init)
    stats.evaluations += 1
    if h0 == INF:
        return None
    open_list = [(h0, h0, next(counter), task.init)]
    closed = set()
    while open_list:
        _, _, _, s = heapq.heappop(open_list)
        if s in closed:
            continue
        if task.is_goal(s):
            return _extract(parents, s, task)
        if stats.expanded >= budget or (deadline is not None and time.monotonic() > deadline):
            return False
        closed.add(s)
        stats.expanded += 1
        g = g_best[s] + 1
        for k, t in task.successors(s):
            if t in closed or g >= g_best.get(t, INF):
                continue
            stats.generated += 1
            h = task.h_ff(t)
            stats.evaluations += 1
            if h == INF:
                continue
            g_best[t] = g
            parents[t] = (s, k)
            heapq.heappush(open_list, (g + h, h, next(counter), t))
    return None


def _eliminate(task: _Task, steps: list[GroundAction]) -> list[GroundAction]:
    """Greedy action elimination: drop any step whose removal, together
    with later steps that become inapplicable, still reaches the goal."""
    idx = {id(a): k for k, a in enumerate(task.actions)}
    ks = [idx[id(a)] for a in steps]
    i = 0
    while i < len(ks):
        s, kept = task.init, []
        for j, k in enumerate(ks):
            if j == i:
                continue
            if task.applicable(s, k):
                s = (s | task.add[k]) & ~task.dele[k]
                kept.append(k)
        if task.is_goal(s) and len(kept) < len(ks):
            ks = kept
        else:
            i += 1
    return [task.actions[k] for k in ks]


def plan(
    problem: PlanningProblem,
    node_budget: int = 200_000,
    time_budget: Optional[float] = None,
    actions: Optional[Sequence[GroundAction]] = None,
) -> SearchResult:
    """Find a plan or prove that none exists.

    Raises :class:`SearchLimitExceeded` when ``node_budget`` expansions (or
    ``time_budget`` seconds) are spent without a verdict.  A result with
    ``plan is None`` means the grounded problem is unsolvable.
    """
    start = time.monotonic()
    deadline = start + time_budget if time_budget is not None else None
    if actions is None:
        actions = problem.ground()
    task = _Task(actions, frozenset(problem.init), problem.goal, problem.constants)
    stats = SearchStats()
    result = _gbfs(task, stats, node_budget // 2, deadline)
    if result is False:
        stats.algorithm = "gbfs+astar"
        result = _astar(task, stats, node_budget, deadline)
    if result:
        result = _eliminate(task, result)
    stats.wall_time = time.monotonic() - start
    if result is False:
        raise SearchLimitExceeded(f"search budget exhausted after {stats.expanded} expansions", stats)
    return SearchResult(result, stats)


def h_relaxed(
    state: frozenset,
    goal: Formula,
    actions: Sequence[GroundAction],
    constants: Optional[Mapping[str, str]] = None,
) -> float:
    """Relaxed-plan estimate of the number of actions from ``state`` to ``goal``.

    Delete effects are ignored. Negated atoms and implications get their own
    relaxed facts, so the estimate stays optimistic and ``inf`` proves the
    goal unreachable.
    """
    task = _Task(actions, frozenset(state), goal, constants or {})
    return task.h_ff(task.init)


def bfs_oracle(
    problem: PlanningProblem,
    max_states: int = 2**20,
    actions: Optional[Sequence[GroundAction]] = None,
) -> Optional[list[GroundAction]]:
    """Shortest plan by breadth-first search, or ``None`` if unsolvable.

    Uses only the set semantics of :class:`GroundAction` and :func:`holds`,
    sharing no code with :func:`plan` beyond grounding.
    """
    if actions is None:
        actions = problem.ground()
    constants = problem.constants
    init = frozenset(problem.init)

    def goal_reached(s):
        return holds(s, problem.goal, constants)

    if goal_reached(init):
        return []
    parents: dict[frozenset, tuple] = {init: (None, None)}
    queue = deque([init])
    while queue:
        s = queue.popleft()
        for a in actions:
            if not a.applicable(s):
                continue
            t = (s | a.add) - a.delete
            if t in parents:
                continue
            parents[t] = (s, a)
            if len(parents) > max_states:
                raise OracleBoundExceeded(f"more than {max_states} states")
            if goal_reached(t):
                steps = []
                while parents[t][0] is not None:
                    t, a_ = parents[t]
                    steps.append(a_)
                return steps[::-1]
            queue.append(t)
    return None


def format_plan(steps: Sequence[GroundAction]) -> str:
    return "".join(f"{a}\n" for a in steps)


__all__ = [
    "DomainError",
    "OracleBoundExceeded",
    "PlanningProblem",
    "SearchLimitExceeded",
    "SearchResult",
    "SearchStats",
    "bfs_oracle",
    "format_plan",
    "goal_clauses",
    "h_relaxed",
    "plan",
]
