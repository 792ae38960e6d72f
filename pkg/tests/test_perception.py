import mpmath
import numpy as np
import pytest
from sklearn.base import clone

from plantolearn.perception import (
    AnchorStore,
    EmptyTrainingSetError,
    PropertyClassifier,
    Sample,
    TrainingSet,
    classifier_train,
    logistic_loss_and_grad,
    sigmoid,
)
from plantolearn.simenv import Detection

F = np.zeros(4)


def det(typ, pos, feats=F):
    return Detection(typ, np.asarray(feats, float), pos)


# anchoring ------------------------------------------------------------------

def test_same_object_keeps_its_constant():
    store = AnchorStore()
    assert store.process([det("Tv", (1, 1))]) == ["tv0"]
    assert store.process([det("Tv", (1, 1), F + 0.1)]) == []
    assert len(store) == 1


def test_distant_or_different_detections_get_new_constants():
    store = AnchorStore()
    store.process([det("Tv", (1, 1))])
    assert store.process([det("Tv", (1, 2))]) == ["tv1"]
    assert store.process([det("Box", (1, 1))]) == ["box0"]
    assert store.process([det("Tv", (1, 1), F + 5.0)]) == ["tv2"]


def test_anchoring_is_idempotent():
    dets = [det("Tv", (0, 0)), det("Tv", (3, 3)), det("Box", (5, 1))]
    store = AnchorStore()
    first = store.process(dets)
    assert first == ["tv0", "tv1", "box0"]
    assert store.process(dets) == []
    assert sorted(a.constant for a in store) == ["box0", "tv0", "tv1"]


# training data ----------------------------------------------------------------

def test_training_set_round_trip(tmp_path):
    ts = TrainingSet("Tv", "is_turned_on")
    ts.add(Sample((0.5, -1.25), True, "tv0", 3))
    ts.add(Sample((1.0, 2.0), True, "tv1", 4), key=("Tv", "is_turned_on"))
    with pytest.raises(ValueError):
        ts.add(Sample((1.0, 2.0), True, "tv1", 5), key=("Tv", "not_is_turned_on"))
    ts.to_csv(tmp_path / "t.csv")
    back = TrainingSet.from_csv(tmp_path / "t.csv", "Tv", "is_turned_on")
    assert back.samples == ts.samples


def test_train_needs_both_sets():
    with pytest.raises(EmptyTrainingSetError):
        classifier_train(PropertyClassifier(), TrainingSet("Tv", "a"), TrainingSet("Tv", "b"))


# classifier -------------------------------------------------------------------

def test_separates_two_points():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array([True, False])
    clf = PropertyClassifier(epochs=200, learning_rate=0.5).fit(X, y)
    assert list(clf.predict(X)) == [True, False]


def test_zero_epochs_leaves_model_unchanged():
    X = np.random.default_rng(0).standard_normal((10, 3))
    y = X[:, 0] > 0
    clf = PropertyClassifier(epochs=5, learning_rate=0.1).fit(X, y)
    before = clf.coef_.copy(), clf.intercept_
    clf.set_params(epochs=0).fit(X, y)
    assert np.array_equal(clf.coef_, before[0]) and clf.intercept_ == before[1]


def test_warm_start_continues():
    X = np.random.default_rng(0).standard_normal((20, 3))
    y = X[:, 0] > 0
    warm = PropertyClassifier(epochs=1, learning_rate=0.1).fit(X, y).fit(X, y)
    cold = PropertyClassifier(epochs=1, learning_rate=0.1, warm_start=False).fit(X, y).fit(X, y)
    once = PropertyClassifier(epochs=1, learning_rate=0.1).fit(X, y)
    assert not np.allclose(warm.coef_, once.coef_)
    assert np.allclose(cold.coef_, once.coef_)


def test_zero_weights_give_half():
    clf = PropertyClassifier()
    clf._init(3)
    clf.coef_[:] = 0.0
    assert np.all(clf.predict_proba(np.ones((2, 3)))[:, 1] == 0.5)


def test_sklearn_conventions():
    clf = PropertyClassifier(epochs=3)
    assert clone(clf).get_params() == clf.get_params()
    X = np.random.default_rng(1).standard_normal((8, 2))
    y = X[:, 0] > 0
    clf.fit(X, y)
    assert clf.predict_proba(X).shape == (8, 2)
    assert 0.0 <= clf.score(X, y) <= 1.0
    back = PropertyClassifier.from_dict(clf.to_dict())
    assert np.array_equal(back.predict_proba(X), clf.predict_proba(X))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n, d = int(rng.integers(1, 20)), int(rng.integers(1, 6))
        X = rng.standard_normal((n, d))
        y = rng.random(n) < 0.5
        w, b = rng.standard_normal(d), float(rng.standard_normal())
        _, gw, gb = logistic_loss_and_grad(w, b, X, y)
        eps = 1e-6
        num = []
        for j in range(d):
            e = np.zeros(d)
            e[j] = eps
            num.append((logistic_loss_and_grad(w + e, b, X, y)[0] - logistic_loss_and_grad(w - e, b, X, y)[0]) / (2 * eps))
        num.append((logistic_loss_and_grad(w, b + eps, X, y)[0] - logistic_loss_and_grad(w, b - eps, X, y)[0]) / (2 * eps))
        ana = np.append(gw, gb)
        num = np.array(num)
        assert np.max(np.abs(ana - num) / np.maximum(np.abs(num), 1e-3)) < 1e-5


def test_sigmoid_against_mpmath():
    mpmath.mp.dps = 50
    zs = np.concatenate([np.linspace(-40, 40, 801), [-700.0, 700.0, 0.0]])
    got = sigmoid(zs)
    for z, g in zip(zs, got):
        ref = float(1 / (1 + mpmath.exp(-mpmath.mpf(float(z)))))
        assert abs(g - ref) <= 1e-12 * max(1.0, abs(ref))
