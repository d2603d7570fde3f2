"""Line-oriented fixture files describing the arm, the desk and the task setup.

Grammar::

    file     := { line }
    line     := blank | comment | header | entry
    comment  := "#" text                       (also allowed after a value)
    header   := "[" section "]"
    section  := "arm" | "table" | "obstacle" | "object" | "task"
    entry    := key "=" value { value }        (values separated by spaces)

Pourers and receivers are paired in order of appearance.  Every header
opens a new record; ``arm`` and ``table`` may appear at most
once, the others any number of times.  Lengths are meters, angles radians.

Keys per section (``?`` marks optional keys):

* ``[arm]``: ``link_lengths`` (4), ``lower`` (7), ``upper`` (7),
  ``base?`` (x y z yaw), ``radii?`` (5), ``name?``.
* ``[table]``: ``lo`` (3), ``hi`` (3).
* ``[obstacle]``: ``center`` (3), ``half`` (3), ``yaw?``, ``name?``.
* ``[object]``: ``name``, ``radius``, ``height``, ``shape?``
  (cylinder | box | cone), ``com?`` (3), ``role`` (pick | pourer | receiver).
* ``[task]``: ``kind`` (pick_place | pour), ``start_region`` and
  ``goal_region`` (xmin xmax ymin ymax), plus optional integers
  ``side_count``, ``top_count``, ``n_steps``, ``n_theta`` and reals
  ``clearance``, ``clutter_prob``, ``bin_prob``, ``platform_prob``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import ArmModel
from .transforms import RigidTransform, rot_z
from .world import SHAPE_CLASSES, Box, SqObject

SECTIONS = ("arm", "table", "obstacle", "object", "task")
ROLES = ("pick", "pourer", "receiver")
TASK_KINDS = ("pick_place", "pour")


class FixtureError(ValueError):
    """Malformed or inconsistent fixture file."""


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    start_region: tuple
    goal_region: tuple
    side_count: int = 8
    top_count: int = 4
    n_steps: int = 8
    n_theta: int = 16
    clearance: float = 0.05
    clutter_prob: float = 0.5
    bin_prob: float = 0.3
    platform_prob: float = 0.2


@dataclass(frozen=True)
class Fixtures:
    arm: ArmModel
    table: Box | None
    obstacles: tuple = ()
    objects: dict = field(default_factory=dict)  # role -> tuple of SqObject
    tasks: dict = field(default_factory=dict)  # kind -> TaskSpec

    def objects_for(self, role: str) -> tuple:
        return self.objects.get(role, ())

    @property
    def pairs(self) -> tuple:
        """``(pourer, receiver)`` pairs in order of appearance."""
        pourers, receivers = self.objects_for("pourer"), self.objects_for("receiver")
        if len(pourers) != len(receivers):
            raise FixtureError("pourer and receiver counts differ; cannot pair them")
        return tuple(zip(pourers, receivers))

    def task(self, kind: str) -> TaskSpec:
        if kind not in self.tasks:
            raise FixtureError(f"no [task] section with kind = {kind}")
        return self.tasks[kind]


def _records(text: str, origin: str):
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise FixtureError(f"{origin}:{lineno}: unterminated section header")
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise FixtureError(f"{origin}:{lineno}: unknown section [{name}]")
            records.append((name, {}, lineno))
            continue
        if "=" not in line:
            raise FixtureError(f"{origin}:{lineno}: expected key = value")
        if not records:
            raise FixtureError(f"{origin}:{lineno}: entry outside of any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise FixtureError(f"{origin}:{lineno}: empty key or value")
        if key in records[-1][1]:
            raise FixtureError(f"{origin}:{lineno}: duplicate key {key!r}")
        records[-1][1][key] = (value, lineno)
    return records


class _Entries:
    def __init__(self, section, entries, lineno, origin):
        self.section = section
        self.entries = entries
        self.lineno = lineno
        self.origin = origin
        self.used = set()

    def _fail(self, msg, lineno=None):
        raise FixtureError(f"{self.origin}:{lineno or self.lineno}: [{self.section}] {msg}")

    def text(self, key, default=None):
        if key not in self.entries:
            if default is None:
                self._fail(f"missing key {key!r}")
            return default
        self.used.add(key)
        return self.entries[key][0]

    def floats(self, key, count=None, default=None):
        if key not in self.entries and default is not None:
            return default
        raw = self.text(key)
        try:
            vals = tuple(float(v) for v in raw.split())
        except ValueError:
            self._fail(f"{key!r} must be numeric", self.entries[key][1])
        if count is not None and len(vals) != count:
            self._fail(f"{key!r} needs {count} values, got {len(vals)}", self.entries[key][1])
        if not all(np.isfinite(vals)):
            self._fail(f"{key!r} must be finite", self.entries[key][1])
        return vals

    def real(self, key, default=None):
        return self.floats(key, 1, None if default is None else (default,))[0]

    def integer(self, key, default):
        if key not in self.entries:
            return default
        raw = self.text(key)
        try:
            return int(raw)
        except ValueError:
            self._fail(f"{key!r} must be an integer", self.entries[key][1])

    def finish(self):
        extra = set(self.entries) - self.used
        if extra:
            key = sorted(extra)[0]
            self._fail(f"unknown key {key!r}", self.entries[key][1])


def _build_arm(e: _Entries) -> ArmModel:
    kwargs = dict(
        link_lengths=e.floats("link_lengths", 4),
        joint_limits=tuple(zip(e.floats("lower", 7), e.floats("upper", 7))),
    )
    if "base" in e.entries:
        x, y, z, yaw = e.floats("base", 4)
        kwargs["base_pose"] = RigidTransform.from_xyz_yaw(x, y, z, yaw)
    if "radii" in e.entries:
        kwargs["link_radii"] = e.floats("radii", 5)
    if "name" in e.entries:
        kwargs["name"] = e.text("name")
    e.finish()
    try:
        return ArmModel(**kwargs)
    except ValueError as exc:
        e._fail(str(exc))


def _build_object(e: _Entries) -> tuple[str, SqObject]:
    role = e.text("role")
    if role not in ROLES:
        e._fail(f"role must be one of {ROLES}")
    shape = e.text("shape", "cylinder")
    if shape not in SHAPE_CLASSES:
        e._fail(f"shape must be one of {SHAPE_CLASSES}")
    com = e.floats("com", 3) if "com" in e.entries else None
    name, radius, height = e.text("name"), e.real("radius"), e.real("height")
    e.finish()
    try:
        return role, SqObject(name, radius, height, com, shape)
    except ValueError as exc:
        e._fail(str(exc))


def _build_task(e: _Entries) -> TaskSpec:
    kind = e.text("kind")
    if kind not in TASK_KINDS:
        e._fail(f"kind must be one of {TASK_KINDS}")
    regions = []
    for key in ("start_region", "goal_region"):
        x0, x1, y0, y1 = e.floats(key, 4)
        if not (x0 < x1 and y0 < y1):
            e._fail(f"{key!r} must have min < max")
        regions.append((x0, x1, y0, y1))
    spec = TaskSpec(
        kind,
        *regions,
        side_count=e.integer("side_count", 8),
        top_count=e.integer("top_count", 4),
        n_steps=e.integer("n_steps", 8),
        n_theta=e.integer("n_theta", 16),
        clearance=e.real("clearance", 0.05),
        clutter_prob=e.real("clutter_prob", 0.5),
        bin_prob=e.real("bin_prob", 0.3),
        platform_prob=e.real("platform_prob", 0.2),
    )
    e.finish()
    if min(spec.side_count, spec.top_count) < 0 or min(spec.n_steps, spec.n_theta) < 1 or spec.clearance < 0:
        e._fail("counts must be non-negative, n_steps/n_theta >= 1, clearance >= 0")
    probs = (spec.clutter_prob, spec.bin_prob, spec.platform_prob)
    if not all(0.0 <= p <= 1.0 for p in probs) or spec.bin_prob + spec.platform_prob > 1.0:
        e._fail("probabilities must lie in [0, 1] and bin_prob + platform_prob <= 1")
    return spec


def parse_fixtures(text: str, origin: str = "<fixtures>") -> Fixtures:
    arm, table = None, None
    obstacles, objects, tasks = [], {}, {}
    names = set()
    for section, entries, lineno in _records(text, origin):
        e = _Entries(section, entries, lineno, origin)
        if section == "arm":
            if arm is not None:
                e._fail("only one [arm] section is allowed")
            arm = _build_arm(e)
        elif section == "table":
            if table is not None:
                e._fail("only one [table] section is allowed")
            lo, hi = e.floats("lo", 3), e.floats("hi", 3)
            e.finish()
            if not all(a < b for a, b in zip(lo, hi)):
                e._fail("table needs lo < hi on every axis")
            table = Box.from_bounds(lo, hi, name="table")
        elif section == "obstacle":
            center, half = e.floats("center", 3), e.floats("half", 3)
            yaw = e.real("yaw", 0.0)
            name = e.text("name", f"obstacle{len(obstacles)}")
            e.finish()
            if min(half) <= 0:
                e._fail("half extents must be positive")
            obstacles.append(Box(center, half, rot_z(yaw), name))
        elif section == "object":
            role, obj = _build_object(e)
            if obj.name in names:
                e._fail(f"duplicate object name {obj.name!r}")
            names.add(obj.name)
            objects.setdefault(role, []).append(obj)
        else:
            spec = _build_task(e)
            if spec.kind in tasks:
                e._fail(f"duplicate task kind {spec.kind!r}")
            tasks[spec.kind] = spec
    return Fixtures(
        arm if arm is not None else ArmModel(),
        table,
        tuple(obstacles),
        {k: tuple(v) for k, v in objects.items()},
        tasks,
    )


def load_fixtures(path=None) -> Fixtures:
    """Parse ``path`` (default: the bundled desk fixture)."""
    if path is None:
        path = Path(__file__).with_name("data") / "desk.fixture"
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FixtureError(f"cannot read fixture file {path}: {exc}") from exc
    return parse_fixtures(text, str(path))
