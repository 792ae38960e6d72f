import math

import numpy as np
import pytest

from plantolearn.simenv import (
    GTD,
    ND,
    Act,
    ConfigError,
    Move,
    Rotate,
    WorldConfig,
    generate_world,
)


def within(count, n, p, z=5.0):
    """``count`` is within ``z`` standard deviations of Binomial(n, p)."""
    return abs(count - n * p) <= z * math.sqrt(n * p * (1 - p)) + 1


def world(**kw):
    return generate_world(WorldConfig(**kw))


def test_empty_world():
    w = world(population={})
    assert w.objects == []
    assert w.detect(GTD) == []


def test_generation_is_deterministic():
    a, b = world(seed=3), world(seed=3)
    assert a.to_dict() == b.to_dict()
    assert world(seed=4).to_dict() != a.to_dict()


def test_property_prior():
    cfg = WorldConfig(width=30, height=30, population={"Tv": 400}, properties={"Tv": {"Is_Turned_On": 0.3}})
    w = generate_world(cfg)
    on = sum(o.properties["Is_Turned_On"] for o in w.objects)
    assert within(on, 400, 0.3)


def test_four_rotations_return_heading():
    w = world()
    h = w.pose.heading
    for _ in range(4):
        w.step(Rotate(90))
    assert w.pose.heading == h
    with pytest.raises(ValueError):
        w.step(Rotate(45))


def test_move_blocked_and_out_of_bounds():
    w = world(width=1, height=2, population={"Tv": 1})
    obj = w.objects[0]
    direction = "N" if obj.position[1] > w.pose.y else "S"
    r = w.step(Move(direction))
    assert not r.ok and r.reason == "blocked"
    r = w.step(Move("E"))
    assert not r.ok and r.reason == "out of bounds"


def adjacent_tv(action_failure=0.0, seed=0):
    w = world(seed=seed, width=2, height=1, population={"Tv": 1}, action_failure=action_failure)
    return w, w.objects[0]


def test_act_sets_property():
    w, tv = adjacent_tv()
    assert w.step(Act(tv.position, "Turn_On")).ok
    assert tv.properties["Is_Turned_On"] is True
    assert w.step(Act(tv.position, "Turn_Off")).ok
    assert tv.properties["Is_Turned_On"] is False
    assert not w.step(Act(w.pose.cell, "Turn_On")).ok


def test_silent_failure_rate():
    w, tv = adjacent_tv(action_failure=0.1, seed=1)
    n = 2000
    for i in range(n):
        w.step(Act(tv.position, "Turn_On" if i % 2 == 0 else "Turn_Off"))
    assert within(w.silent_failures, n, 0.1)


def test_zero_noise_views_identical():
    w = world(view_noise=0.0)
    views = w.render_views(w.objects[0], 5)
    assert np.all(views == views[0])


def test_property_shifts_mean_by_signal():
    w = world(signal_strength=2.0)
    tv = w.objects[0]
    tv.properties["Is_Turned_On"] = False
    off = w.mean_features(tv)
    tv.properties["Is_Turned_On"] = True
    on = w.mean_features(tv)
    assert np.linalg.norm(on - off) == pytest.approx(2.0)


def test_view_mean_converges():
    w = world(view_noise=0.5)
    tv = w.objects[0]
    views = w.render_views(tv, 4000)
    # 5 standard errors per coordinate
    assert np.all(np.abs(views.mean(axis=0) - w.mean_features(tv)) < 5 * 0.5 / math.sqrt(4000))


def visible_everything(w):
    return {o.position: True for o in w.objects}


def test_gtd_detects_every_visible_object():
    w = world(width=6, height=6, population={"Tv": 3})
    dets = w.detect(GTD, visible_everything(w))
    assert sorted(d.position for d in dets) == sorted(o.position for o in w.objects)
    assert all(d.type == "Tv" for d in dets)


def test_nd_miss_rate_one():
    w = world(detector={"miss_rate": 1.0, "spurious_rate": 0.0})
    assert w.detect(ND, visible_everything(w)) == []


def test_nd_misclassification_rate():
    cfg = WorldConfig(
        population={"Tv": 1, "Box": 1},
        detector={"miss_rate": 0.0, "misclassification_rate": 0.2, "spurious_rate": 0.0},
    )
    w = generate_world(cfg)
    vis = visible_everything(w)
    wrong = n = 0
    for _ in range(1000):
        for d in w.detect(ND, vis):
            n += 1
            wrong += d.type != w.object_at(d.position).type
    assert n == 2000
    assert within(wrong, n, 0.2)


def test_overfull_world_rejected():
    with pytest.raises(ConfigError):
        world(width=2, height=2, population={"Tv": 4})


def test_invalid_rate_rejected():
    with pytest.raises(ConfigError):
        WorldConfig(action_failure=1.5)
    with pytest.raises(ConfigError):
        WorldConfig.from_dict({"colour": "red"})


def test_free_cells_stay_connected():
    w = world(width=5, height=5, population={"Tv": 8, "Box": 8})
    free = set(w.free_cells())
    start = min(free)
    seen, stack = {start}, [start]
    while stack:
        x, y = stack.pop()
        for n in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if n in free and n not in seen:
                seen.add(n)
                stack.append(n)
    assert seen == free
