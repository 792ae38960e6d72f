"""Synthetic grid household with hidden object properties.

Objects sit on cells of a rectangular grid and block movement and line of
sight. An "image" of an object is a feature vector::

    prototype + sum(signal * direction[type, prop] for props that are true) + noise

Type centres and property directions come from ``appearance_seed`` so that
every world built from one config shares them, while object placement,
per-object prototype offsets and property values come from ``seed``.
All randomness is drawn from independent :class:`numpy.random.Generator`
streams spawned from these seeds.
"""
from __future__ import annotations

import copy
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

HEADINGS = (0, 90, 180, 270)
DIRECTIONS = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
HEADING_OF = {"E": 0, "N": 90, "W": 180, "S": 270}

GTD = "GTD"
ND = "ND"
MODES = (GTD, ND)

Cell = tuple[int, int]


class ConfigError(ValueError):
    pass


@dataclass
class DetectorNoise:
    miss_rate: float = 0.2
    misclassification_rate: float = 0.1
    feature_jitter: float = 0.1
    spurious_rate: float = 0.05


@dataclass
class WorldConfig:
    """Declarative world description, loadable from JSON.

    ``properties`` maps each type to its applicable properties and the prior
    probability that each is initially true. ``operators`` maps a base
    operator name to the ``[property, value]`` it sets.
    """

    seed: int = 0
    appearance_seed: int = 0
    width: int = 8
    height: int = 8
    population: dict = field(default_factory=lambda: {"Tv": 2})
    properties: dict = field(default_factory=lambda: {"Tv": {"Is_Turned_On": 0.5}})
    operators: dict = field(
        default_factory=lambda: {"Turn_On": ["Is_Turned_On", True], "Turn_Off": ["Is_Turned_On", False]}
    )
    feature_dim: int = 16
    signal_strength: float = 1.0
    signal_overrides: dict = field(default_factory=dict)
    view_noise: float = 0.1
    type_spread: float = 1.0
    object_spread: float = 0.2
    detector: DetectorNoise = field(default_factory=DetectorNoise)
    action_failure: float = 0.05
    view_range: float = 4.0
    field_of_view: float = 120.0
    interaction_range: float = 1.5
    max_steps: int = 2000

    def __post_init__(self):
        if isinstance(self.detector, dict):
            self.detector = DetectorNoise(**self.detector)
        self.validate()

    def validate(self) -> None:
        rates = {
            "action_failure": self.action_failure,
            **{f"detector.{k}": v for k, v in asdict(self.detector).items() if k != "feature_jitter"},
        }
        for name, v in rates.items():
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.view_noise < 0 or self.detector.feature_jitter < 0:
            raise ConfigError("noise levels must be non-negative")
        if self.feature_dim < 2:
            raise ConfigError("feature_dim must be at least 2")
        if self.width < 1 or self.height < 1:
            raise ConfigError("grid must have at least one cell")
        for t, n in self.population.items():
            if int(n) < 0:
                raise ConfigError(f"negative population for {t}")
        for t, props in self.properties.items():
            for p, prior in props.items():
                if not 0.0 <= prior <= 1.0:
                    raise ConfigError(f"prior of {t}.{p} must lie in [0, 1]")
        for op, spec in self.operators.items():
            if len(spec) != 2 or not isinstance(spec[1], bool):
                raise ConfigError(f"operator {op} must map to [property, true|false]")

    @property
    def types(self) -> list[str]:
        return sorted(set(self.population) | set(self.properties))

    def signal(self, typ: str, prop: str) -> float:
        return float(self.signal_overrides.get(f"{typ}:{prop}", self.signal_strength))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown world config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "WorldConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "WorldConfig":
        d = self.to_dict()
        if "detector" in changes and isinstance(changes["detector"], dict):
            changes["detector"] = {**d["detector"], **changes["detector"]}
        d.update(changes)
        return WorldConfig.from_dict(d)


@dataclass
class WorldObject:
    id: str
    type: str
    position: Cell
    properties: dict
    prototype: np.ndarray

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "type": self.type,
            "position": list(self.position),
            "properties": dict(sorted(self.properties.items())),
            "prototype": [float(x) for x in self.prototype],
        }


@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    heading: int

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)


@dataclass
class Detection:
    type: str
    features: np.ndarray
    position: Cell
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {
            "type": self.type,
            "position": list(self.position),
            "confidence": round(float(self.confidence), 6),
            "features": [float(x) for x in self.features],
        }


@dataclass
class Percept:
    pose: Pose
    visible: dict  # cell -> occupied
    detections: list

    def to_dict(self) -> dict:
        return {
            "pose": asdict(self.pose),
            "visible": sorted([list(c) + [occ] for c, occ in self.visible.items()]),
            "detections": [d.to_dict() for d in self.detections],
        }


# low-level operations


@dataclass(frozen=True)
class Move:
    direction: str


@dataclass(frozen=True)
class Rotate:
    angle: int


@dataclass(frozen=True)
class Act:
    position: Cell
    operator: str


LowLevelOp = Union[Move, Rotate, Act]


@dataclass
class StepResult:
    ok: bool
    percept: Percept
    reason: str = ""


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


class World:
    """Mutable world state. Use :func:`generate_world` to build one."""

    def __init__(self, cfg: WorldConfig, objects: list[WorldObject], pose: Pose, appearance: dict, streams: dict):
        self.cfg = cfg
        self.objects = objects
        self.pose = pose
        self.type_centres = appearance["centres"]
        self.directions = appearance["directions"]
        self._rng = streams
        self._by_cell = {o.position: o for o in objects}
        self.steps = 0
        self.silent_failures = 0

    # geometry ---------------------------------------------------------------

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.cfg.width and 0 <= c[1] < self.cfg.height

    def occupied(self, c: Cell) -> bool:
        return c in self._by_cell

    def object_at(self, c: Cell) -> Optional[WorldObject]:
        return self._by_cell.get(c)

    def _line_clear(self, a: Cell, b: Cell) -> bool:
        """Bresenham line of sight; end points never block."""
        x0, y0 = a
        x1, y1 = b
        dx, dy = abs(x1 - x0), -abs(y1 - y0)
        sx, sy = (1 if x1 > x0 else -1), (1 if y1 > y0 else -1)
        err = dx + dy
        while (x0, y0) != (x1, y1):
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy
            if (x0, y0) != (x1, y1) and (x0, y0) in self._by_cell:
                return False
        return True

    def visible_cells(self, pose: Optional[Pose] = None) -> dict:
        pose = pose or self.pose
        r = self.cfg.view_range
        half = self.cfg.field_of_view / 2
        out = {pose.cell: False}
        ri = int(math.floor(r))
        for dx in range(-ri, ri + 1):
            for dy in range(-ri, ri + 1):
                c = (pose.x + dx, pose.y + dy)
                if (dx, dy) == (0, 0) or not self.in_bounds(c) or math.hypot(dx, dy) > r:
                    continue
                ang = math.degrees(math.atan2(dy, dx))
                diff = abs((ang - pose.heading + 180) % 360 - 180)
                if diff > half + 1e-9:
                    continue
                if self._line_clear(pose.cell, c):
                    out[c] = self.occupied(c)
        return out

    def distance(self, c: Cell) -> float:
        return math.hypot(c[0] - self.pose.x, c[1] - self.pose.y)

    # rendering ----------------------------------------------------------------

    def mean_features(self, obj: WorldObject) -> np.ndarray:
        f = obj.prototype.copy()
        for p, value in obj.properties.items():
            if value:
                f = f + self.cfg.signal(obj.type, p) * self.directions[(obj.type, p)]
        return f

    def render_views(self, obj: WorldObject, k: int) -> np.ndarray:
        """``k`` noisy views of ``obj`` as a ``(k, D)`` array."""
        mean = self.mean_features(obj)
        noise = self._rng["render"].standard_normal((k, self.cfg.feature_dim)) * self.cfg.view_noise
        return mean + noise

    def capture(self, position: Cell, k: int) -> np.ndarray:
        """Views of the object at ``position``; it must currently be visible."""
        obj = self.object_at(position)
        if obj is None or position not in self.visible_cells():
            raise LookupError(f"no visible object at {position}")
        self.steps += k
        return self.render_views(obj, k)

    def detect(self, mode: str = GTD, visible: Optional[dict] = None) -> list:
        if mode not in MODES:
            raise ValueError(f"unknown detection mode {mode}")
        visible = self.visible_cells() if visible is None else visible
        objs = [self._by_cell[c] for c in sorted(visible) if visible[c]]
        if mode == GTD:
            return [Detection(o.type, self.render_views(o, 1)[0], o.position, 1.0) for o in objs]
        noise = self.cfg.detector
        rng = self._rng["detect"]
        types = self.cfg.types
        out = []
        for o in objs:
            if rng.random() < noise.miss_rate:
                continue
            typ = o.type
            if len(types) > 1 and rng.random() < noise.misclassification_rate:
                others = [t for t in types if t != o.type]
                typ = others[int(rng.integers(len(others)))]
            feats = self.render_views(o, 1)[0] + rng.standard_normal(self.cfg.feature_dim) * noise.feature_jitter
            out.append(Detection(typ, feats, o.position, float(rng.uniform(0.5, 1.0))))
        free = [c for c in sorted(visible) if not visible[c] and c != self.pose.cell]
        if free and types and rng.random() < noise.spurious_rate:
            c = free[int(rng.integers(len(free)))]
            typ = types[int(rng.integers(len(types)))]
            feats = self.type_centres[typ] + rng.standard_normal(self.cfg.feature_dim) * self.cfg.object_spread
            out.append(Detection(typ, feats, c, float(rng.uniform(0.0, 0.5))))
        return out

    def percept(self, mode: str = GTD) -> Percept:
        visible = self.visible_cells()
        return Percept(self.pose, visible, self.detect(mode, visible))

    # actuation ----------------------------------------------------------------

    def step(self, op: LowLevelOp, mode: str = GTD) -> StepResult:
        self.steps += 1
        ok, reason = True, ""
        if isinstance(op, Move):
            if op.direction not in DIRECTIONS:
                raise ValueError(f"unknown direction {op.direction}")
            dx, dy = DIRECTIONS[op.direction]
            target = (self.pose.x + dx, self.pose.y + dy)
            if not self.in_bounds(target):
                ok, reason = False, "out of bounds"
            elif self.occupied(target):
                ok, reason = False, "blocked"
            else:
                self.pose = Pose(target[0], target[1], self.pose.heading)
        elif isinstance(op, Rotate):
            if op.angle % 90:
                raise ValueError("rotation must be a multiple of 90 degrees")
            self.pose = Pose(self.pose.x, self.pose.y, (self.pose.heading + op.angle) % 360)
        elif isinstance(op, Act):
            ok, reason = self._act(op)
        else:
            raise TypeError(f"not a low-level operation: {op!r}")
        return StepResult(ok, self.percept(mode), reason)

    def _act(self, op: Act) -> tuple[bool, str]:
        spec = self.cfg.operators.get(op.operator)
        if spec is None:
            return False, f"unknown operator {op.operator}"
        prop, value = spec
        obj = self.object_at(tuple(op.position))
        if obj is None:
            return False, "no object there"
        if self.distance(obj.position) > self.cfg.interaction_range:
            return False, "out of range"
        if prop not in obj.properties:
            return False, f"{op.operator} does not apply to {obj.type}"
        if self._rng["act"].random() < self.cfg.action_failure:
            self.silent_failures += 1
            return True, ""
        obj.properties[prop] = value
        return True, ""

    # misc -------------------------------------------------------------------

    def free_cells(self) -> list[Cell]:
        return [(x, y) for x in range(self.cfg.width) for y in range(self.cfg.height) if (x, y) not in self._by_cell]

    def copy(self) -> "World":
        return copy.deepcopy(self)

    def reseeded(self, seed) -> "World":
        """Independent copy whose noise streams restart from ``seed``."""
        w = self.copy()
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        w._rng = dict(zip(("render", "detect", "act"), map(np.random.default_rng, ss.spawn(3))))
        return w

    def to_dict(self) -> dict:
        return {
            "config": self.cfg.to_dict(),
            "pose": asdict(self.pose),
            "objects": [o.to_dict() for o in self.objects],
        }


def _connected(free: set, width: int, height: int) -> bool:
    if not free:
        return True
    start = min(free)
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in DIRECTIONS.values():
            n = (x + dx, y + dy)
            if n in free and n not in seen:
                seen.add(n)
                queue.append(n)
    return len(seen) == len(free)


def appearance_model(cfg: WorldConfig) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.appearance_seed))
    centres, directions = {}, {}
    for t in cfg.types:
        centres[t] = rng.standard_normal(cfg.feature_dim) * cfg.type_spread
        for p in sorted(cfg.properties.get(t, {})):
            directions[(t, p)] = _unit(rng, cfg.feature_dim)
    return {"centres": centres, "directions": directions}


def generate_world(cfg: WorldConfig) -> World:
    """Place objects so that free cells stay 4-connected; deterministic in ``cfg``."""
    cfg.validate()
    total = sum(int(n) for n in cfg.population.values())
    cells = cfg.width * cfg.height
    if total > cells - 1:
        raise ConfigError(f"{total} objects do not fit in {cells} cells with room for the agent")
    layout, render, detect, act = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(4)
    )
    appearance = appearance_model(cfg)
    free = {(x, y) for x in range(cfg.width) for y in range(cfg.height)}
    objects = []
    for t in sorted(cfg.population):
        for i in range(int(cfg.population[t])):
            candidates = sorted(free)
            order = layout.permutation(len(candidates))
            for j in order:
                c = candidates[int(j)]
                if _connected(free - {c}, cfg.width, cfg.height):
                    break
            else:
                raise ConfigError("cannot place objects without disconnecting the grid")
            free.discard(c)
            props = {p: bool(layout.random() < prior) for p, prior in sorted(cfg.properties.get(t, {}).items())}
            proto = appearance["centres"][t] + layout.standard_normal(cfg.feature_dim) * cfg.object_spread
            objects.append(WorldObject(f"{t.lower()}_{i}", t, c, props, proto))
    start = sorted(free)[int(layout.integers(len(free)))]
    heading = HEADINGS[int(layout.integers(4))]
    streams = {"render": render, "detect": detect, "act": act}
    return World(cfg, objects, Pose(start[0], start[1], heading), appearance, streams)


def heading_towards(src: Cell, dst: Cell) -> int:
    """The grid heading closest to the direction from ``src`` to ``dst``."""
    ang = math.degrees(math.atan2(dst[1] - src[1], dst[0] - src[0])) % 360
    return min(HEADINGS, key=lambda h: (abs((ang - h + 180) % 360 - 180), h))
