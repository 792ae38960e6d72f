"""Ground-truth test sets, precision/recall and tabular reports."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .simenv import DIRECTIONS, GTD, Move, Rotate, World

MODES_ORDER = ("ND", "GTD")


@dataclass
class TestSet:
    """Views of objects of ``type`` labelled with the true value of ``prop``."""

    __test__ = False  # not a pytest class

    type: str
    prop: str
    X: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    y: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def absent(self) -> bool:
        return len(self) == 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            dim = self.X.shape[1] if len(self) else 0
            w.writerow([f"f{i}" for i in range(dim)] + ["label"])
            for x, label in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in x] + [int(label)])

    @classmethod
    def from_csv(cls, path, typ: str, prop: str) -> "TestSet":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if len(rows) <= 1:
            return cls(typ, prop)
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(typ, prop, data[:, :-1], data[:, -1].astype(bool))


def generate_testset(
    world: World,
    pairs: Iterable[tuple[str, str]],
    seed: int,
    size: int,
    max_steps: Optional[int] = None,
) -> dict[tuple[str, str], TestSet]:
    """Random-walk a copy of ``world`` collecting views labelled by ground truth.

    After each view the viewed object's properties are redrawn from their
    priors so both labels occur. Stops when every pair has ``size`` examples
    or after ``max_steps`` moves (default ``50 * size``); pairs that were
    never seen come back empty.
    """
    if size < 1:
        raise ValueError("test-set size must be at least 1")
    pairs = [tuple(p) for p in pairs]
    walk_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    w = world.reseeded(noise_seed)
    rng = np.random.default_rng(walk_seed)
    collected: dict = {p: ([], []) for p in pairs}
    max_steps = 50 * size if max_steps is None else max_steps
    moves = sorted(DIRECTIONS)
    for _ in range(max_steps):
        if all(len(collected[p][1]) >= size for p in pairs):
            break
        for det in w.detect(GTD):
            obj = w.object_at(det.position)
            for p in pairs:
                t, prop = p
                if obj.type != t or prop not in obj.properties or len(collected[p][1]) >= size:
                    continue
                collected[p][0].append(w.render_views(obj, 1)[0])
                collected[p][1].append(obj.properties[prop])
            priors = w.cfg.properties.get(obj.type, {})
            for prop in sorted(obj.properties):
                obj.properties[prop] = bool(rng.random() < priors[prop])
        if rng.random() < 0.3:
            w.step(Rotate(int(rng.choice([90, -90]))))
        else:
            w.step(Move(moves[int(rng.integers(len(moves)))]))
    out = {}
    for p in pairs:
        X, y = collected[p]
        if y:
            out[p] = TestSet(p[0], p[1], np.array(X), np.array(y, dtype=bool))
        else:
            out[p] = TestSet(p[0], p[1])
    return out


def confusion(y_true, y_pred) -> tuple[int, int, int, int]:
    y_true = np.asarray(y_true, bool)
    y_pred = np.asarray(y_pred, bool)
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    tn = int(np.sum(~y_true & ~y_pred))
    return tp, fp, fn, tn


def precision_recall_counts(tp: int, fp: int, fn: int) -> tuple[float, float]:
    """Precision and recall; both are 0 when nothing is predicted positive."""
    if tp + fp == 0:
        return 0.0, 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def precision_recall(model, testset: TestSet) -> Optional[tuple[float, float]]:
    """``None`` for an empty test set."""
    if testset.absent:
        return None
    tp, fp, fn, _ = confusion(testset.y, model.predict(testset.X))
    return precision_recall_counts(tp, fp, fn)


@dataclass
class MetricsRow:
    type: str
    prop: str
    mode: str
    n_test: int
    n_train: int
    precision: Optional[float] = None
    recall: Optional[float] = None

    def __post_init__(self):
        for v in (self.precision, self.recall):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError("metrics must lie in [0, 1]")


def weighted_average(rows: Sequence[MetricsRow]) -> tuple[Optional[float], Optional[float]]:
    """Mean precision and recall over present rows, weighted by test-set size."""
    present = [r for r in rows if r.precision is not None and r.n_test > 0]
    total = sum(r.n_test for r in present)
    if not total:
        return None, None
    p = sum(r.precision * r.n_test for r in present) / total
    r_ = sum(r.recall * r.n_test for r in present) / total
    return p, r_


COLUMNS = ["type"] + [f"{col}_{m}" for col in ("G", "T", "P", "R") for m in MODES_ORDER]


def _fmt(v, absent: str):
    if v is None:
        return absent
    if isinstance(v, float):
        return f"{v:.3f}"
    return v


def report(rows: Sequence[MetricsRow], prop: Optional[str] = None) -> dict:
    """Table for one property: one row per type plus a weighted-average row.

    Columns follow ``type, |G|, |T|, precision, recall`` with an ND and a
    GTD value for each metric.
    """
    props = {r.prop for r in rows}
    if prop is None:
        if len(props) > 1:
            raise ValueError("rows mix properties; pass prop=")
        prop = next(iter(props), "")
    rows = [r for r in rows if r.prop == prop]
    by_type: dict[str, dict[str, MetricsRow]] = {}
    for r in rows:
        by_type.setdefault(r.type, {})[r.mode] = r
    table = []
    for t in sorted(by_type):
        entry = {"type": t}
        for col, attr in (("G", "n_test"), ("T", "n_train"), ("P", "precision"), ("R", "recall")):
            for m in MODES_ORDER:
                r = by_type[t].get(m)
                entry[f"{col}_{m}"] = None if r is None else getattr(r, attr)
        table.append(entry)
    avg = {"type": "Weighted avg"}
    for m in MODES_ORDER:
        mode_rows = [r for r in rows if r.mode == m]
        p, r_ = weighted_average(mode_rows)
        avg[f"G_{m}"] = sum(r.n_test for r in mode_rows) if mode_rows else None
        avg[f"T_{m}"] = sum(r.n_train for r in mode_rows) if mode_rows else None
        avg[f"P_{m}"], avg[f"R_{m}"] = p, r_
    return {"property": prop, "columns": COLUMNS, "rows": table, "weighted_avg": avg}


def table_json(table: dict) -> str:
    return json.dumps(table, indent=2, sort_keys=True) + "\n"


def table_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table["columns"])
    for row in table["rows"] + [table["weighted_avg"]]:
        w.writerow([_fmt(row[c], "-") for c in table["columns"]])
    return buf.getvalue()


def table_text(table: dict) -> str:
    """Fixed-width rendering with ``-`` for absent values."""
    cols = table["columns"]
    body = [[str(_fmt(row[c], "-")) for c in cols] for row in table["rows"] + [table["weighted_avg"]]]
    widths = [max(len(c), *(len(r[i]) for r in body)) for i, c in enumerate(cols)]
    lines = [f"# {table['property']}", "  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in body]
    return "\n".join(lines) + "\n"


def evaluate_models(
    models: dict,
    testsets: dict,
    train_sizes: dict,
    mode: str,
) -> list[MetricsRow]:
    """One row per test-set key ``(type, prop)``; missing models or data are absent."""
    rows = []
    for (t, p), ts in sorted(testsets.items()):
        model = models.get((t, p))
        pr = precision_recall(model, ts) if model is not None else None
        rows.append(
            MetricsRow(t, p, mode, len(ts), int(train_sizes.get((t, p), 0)), *(pr if pr is not None else (None, None)))
        )
    return rows
