"""Anchoring, training-set bookkeeping and online property classifiers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


# ---------------------------------------------------------------------------
# anchoring


@dataclass
class Anchor:
    constant: str
    type: str
    centroid: np.ndarray
    position: tuple[int, int]
    count: int = 1

    def update(self, features: np.ndarray, position) -> None:
        self.count += 1
        self.centroid = self.centroid + (features - self.centroid) / self.count
        self.position = tuple(position)


def feature_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Root-mean-square difference, so thresholds do not scale with dimension."""
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


class AnchorStore:
    """Binds detections to symbolic constants.

    A detection matches an anchor of the same type lying within ``delta_pos``
    cells whose centroid is within ``delta_feat`` (RMS); among several
    matches the nearest by position, then by features, wins.
    """

    def __init__(self, delta_pos: float = 0.5, delta_feat: float = 0.6):
        self.delta_pos = delta_pos
        self.delta_feat = delta_feat
        self.anchors: dict[str, Anchor] = {}
        self._counters: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.anchors)

    def __iter__(self):
        return iter(self.anchors.values())

    def _fresh(self, typ: str) -> str:
        n = self._counters.get(typ, 0)
        self._counters[typ] = n + 1
        return f"{typ.lower()}{n}"

    def candidates(self, detection) -> list[tuple[float, float, str]]:
        out = []
        for a in self.anchors.values():
            if a.type != detection.type:
                continue
            dpos = math.dist(a.position, detection.position)
            if dpos > self.delta_pos:
                continue
            dfeat = feature_distance(a.centroid, detection.features)
            if dfeat <= self.delta_feat:
                out.append((dpos, dfeat, a.constant))
        return sorted(out)

    def match(self, detection) -> tuple[str, bool]:
        """Constant for ``detection`` and whether it was newly created."""
        cands = self.candidates(detection)
        if cands:
            name = cands[0][2]
            self.anchors[name].update(np.asarray(detection.features, float), detection.position)
            return name, False
        name = self._fresh(detection.type)
        self.anchors[name] = Anchor(
            name, detection.type, np.array(detection.features, float), tuple(detection.position)
        )
        return name, True

    def process(self, detections: Iterable) -> list[str]:
        """Anchor a percept's detections; returns the newly created constants."""
        return [name for name, new in (self.match(d) for d in detections) if new]


def anchor_match(detection, anchors: AnchorStore) -> str:
    return anchors.match(detection)[0]


# ---------------------------------------------------------------------------
# training data


@dataclass(frozen=True)
class Sample:
    features: tuple
    label: bool
    constant: str
    step: int


@dataclass
class TrainingSet:
    """Append-only samples for one (type, property-name) key.

    ``prop`` may be a negated name such as ``not_is_turned_on``; every
    sample's label records whether the base property was believed true.
    """

    type: str
    prop: str
    samples: list = field(default_factory=list)

    @property
    def key(self) -> tuple[str, str]:
        return (self.type, self.prop)

    def __len__(self) -> int:
        return len(self.samples)

    def add(self, sample: Sample, key: Optional[tuple] = None) -> "TrainingSet":
        if key is not None and tuple(key) != self.key:
            raise ValueError(f"sample for {key} added to set {self.key}")
        self.samples.append(sample)
        return self

    @property
    def X(self) -> np.ndarray:
        if not self.samples:
            return np.empty((0, 0))
        return np.array([s.features for s in self.samples], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=bool)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            dim = len(self.samples[0].features) if self.samples else 0
            w.writerow([f"f{i}" for i in range(dim)] + ["label", "constant", "step"])
            for s in self.samples:
                w.writerow([repr(float(x)) for x in s.features] + [int(s.label), s.constant, s.step])

    @classmethod
    def from_csv(cls, path, typ: str, prop: str) -> "TrainingSet":
        ts = cls(typ, prop)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = csv.reader(fh)
            header = next(rows, None)
            if header is None:
                return ts
            dim = len(header) - 3
            for r in rows:
                ts.samples.append(Sample(tuple(float(x) for x in r[:dim]), bool(int(r[dim])), r[dim + 1], int(r[dim + 2])))
        return ts


def dataset_add(ts: TrainingSet, sample: Sample, key: Optional[tuple] = None) -> TrainingSet:
    return ts.add(sample, key)


# ---------------------------------------------------------------------------
# classifier


def sigmoid(z):
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, sample_weight=None):
    """Mean binary cross-entropy and its gradient with respect to (w, b)."""
    y = np.asarray(y, dtype=float)
    sw = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, float)
    z = X @ w + b
    # log(1 + e^z) - y z, written stably
    loss = np.sum(sw * (np.logaddexp(0.0, z) - y * z)) / len(y)
    r = sw * (sigmoid(z) - y) / len(y)
    return float(loss), X.T @ r, float(r.sum())


class PropertyClassifier(ClassifierMixin, BaseEstimator):
    """Binary logistic regression trained by per-sample gradient descent.

    Parameters
    ----------
    epochs : int
        Passes over the data per call to :meth:`fit`.
    learning_rate : float
    threshold : float
        ``predict`` answers true when the probability exceeds it.
    warm_start : bool
        Continue from the current weights on refit instead of reinitialising.
    balance : bool
        Weight samples inversely to their class frequency.
    """

    def __init__(
        self,
        epochs: int = 10,
        learning_rate: float = 1e-4,
        threshold: float = 0.5,
        warm_start: bool = True,
        balance: bool = False,
        random_state: Optional[int] = 0,
    ):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.threshold = threshold
        self.warm_start = warm_start
        self.balance = balance
        self.random_state = random_state

    def _init(self, n_features: int) -> None:
        rng = np.random.default_rng(self.random_state)
        self.coef_ = rng.standard_normal(n_features) * 0.01
        self.intercept_ = 0.0
        self.n_features_in_ = n_features
        self.classes_ = np.array([False, True])
        self._rng = rng

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if not (self.warm_start and hasattr(self, "coef_")):
            self._init(X.shape[1])
        return self._sgd(X, y, self.epochs)

    def partial_fit(self, X, y):
        X, y = check_X_y(X, y)
        if not hasattr(self, "coef_"):
            self._init(X.shape[1])
        return self._sgd(X, y, 1)

    def _sgd(self, X, y, epochs: int):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        y = np.asarray(y, dtype=bool).astype(float)
        weights = np.ones(len(y))
        if self.balance:
            n_pos = y.sum()
            n_neg = len(y) - n_pos
            if n_pos and n_neg:
                weights = np.where(y == 1, len(y) / (2 * n_pos), len(y) / (2 * n_neg))
        w, b = self.coef_.copy(), float(self.intercept_)
        for _ in range(int(epochs)):
            for i in self._rng.permutation(len(y)):
                g = weights[i] * (sigmoid(X[i] @ w + b) - y[i])
                w -= self.learning_rate * g * X[i]
                b -= self.learning_rate * g
        self.coef_, self.intercept_ = w, b
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.predict_proba(X)[:, 1] > self.threshold

    # persistence -----------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"params": self.get_params()}
        if hasattr(self, "coef_"):
            d["coef"] = [float(x) for x in self.coef_]
            d["intercept"] = float(self.intercept_)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PropertyClassifier":
        model = cls(**d["params"])
        if "coef" in d:
            model._init(len(d["coef"]))
            model.coef_ = np.array(d["coef"], dtype=float)
            model.intercept_ = float(d["intercept"])
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class EmptyTrainingSetError(ValueError):
    pass


def classifier_train(model: PropertyClassifier, positives: TrainingSet, negatives: TrainingSet) -> PropertyClassifier:
    """Fit ``model`` with ``positives`` as class 1 and ``negatives`` as class 0."""
    if not len(positives) or not len(negatives):
        raise EmptyTrainingSetError(
            f"training needs samples in both {positives.key} ({len(positives)}) and {negatives.key} ({len(negatives)})"
        )
    X = np.vstack([positives.X, negatives.X])
    y = np.concatenate([np.ones(len(positives), bool), np.zeros(len(negatives), bool)])
    return model.fit(X, y)
