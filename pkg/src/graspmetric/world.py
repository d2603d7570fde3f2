"""Tabletop scenes and collision queries.

Every solid reduces to capsules and oriented boxes:

* arm links are capsules;
* obstacles and the table are oriented boxes;
* objects are capsules (cylinders and cones, using the largest radius) or
  boxes (``shape_class == "box"``, square cross-section of half width
  ``radius``).  An object additionally carries its exact axial extent and
  its exact axis-aligned bounds, and a pair only counts as colliding when all
  of these tests agree.  Each test is a necessary condition for contact, so
  the combination stays conservative while letting objects rest on a support.

All bodies are inflated by ``MARGIN``.  Object contacts within ``REST_TOL``
along the vertical or along the object axis are treated as resting, not
penetrating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from numba import njit

from . import geometry as geo
from .kinematics import ArmModel, joint_frames
from .transforms import RigidTransform

MARGIN = 0.002
REST_TOL = 1e-3
SHAPE_CLASSES = ("cylinder", "box", "cone")

# non-adjacent arm link pairs (base, upper arm, forearm, hand, fingers)
SELF_PAIRS = ((0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 4))
_SELF_I = np.array([i for i, _ in SELF_PAIRS], dtype=np.int64)
_SELF_J = np.array([j for _, j in SELF_PAIRS], dtype=np.int64)


@dataclass(frozen=True)
class SqObject:
    """Symmetric tabletop object.

    The object frame sits at the centre of the bottom face with +z along the
    symmetry axis.  ``com`` defaults to the geometric centroid.
    """

    name: str
    radius: float
    height: float
    com: tuple | None = None
    shape_class: str = "cylinder"

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError(f"{self.name}: radius and height must be positive")
        if self.shape_class not in SHAPE_CLASSES:
            raise ValueError(f"{self.name}: unknown shape class {self.shape_class!r}")
        if self.com is None:
            centroid_z = self.height / 4 if self.shape_class == "cone" else self.height / 2
            object.__setattr__(self, "com", (0.0, 0.0, centroid_z))
        com = tuple(float(v) for v in self.com)
        object.__setattr__(self, "com", com)
        lateral = np.hypot(com[0], com[1])
        lateral_max = self.radius * (np.sqrt(2) if self.shape_class == "box" else 1.0)
        if lateral > lateral_max + 1e-12 or not -1e-12 <= com[2] <= self.height + 1e-12:
            raise ValueError(f"{self.name}: centre of mass outside the object")

    @property
    def com_array(self) -> np.ndarray:
        return np.array(self.com)


@dataclass(frozen=True, eq=False)
class Box:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    name: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        if np.any(self.half_extents <= 0):
            raise ValueError(f"{self.name}: half extents must be positive")

    @classmethod
    def from_bounds(cls, lo, hi, name: str = "box") -> Box:
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        return cls((lo + hi) / 2, (hi - lo) / 2, name=name)

    @property
    def pose(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.center)

    @property
    def top(self) -> float:
        """Highest point of the box."""
        return float(self.center[2] + np.abs(self.rotation[2]) @ self.half_extents)


@dataclass(frozen=True, eq=False)
class Scene:
    arm: ArmModel = field(default_factory=ArmModel)
    table: Box | None = None
    obstacles: tuple = ()
    objects: tuple = ()  # ((SqObject, RigidTransform), ...)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "objects", tuple((o, p) for o, p in self.objects))

    @property
    def table_top(self) -> float:
        return self.table.top if self.table is not None else -np.inf

    @property
    def boxes(self) -> tuple:
        return ((self.table,) if self.table is not None else ()) + self.obstacles

    def object_names(self) -> list[str]:
        return [o.name for o, _ in self.objects]

    def object_pose(self, name: str) -> RigidTransform:
        for o, p in self.objects:
            if o.name == name:
                return p
        raise KeyError(name)

    def without_object(self, name: str) -> Scene:
        return replace(self, objects=tuple((o, p) for o, p in self.objects if o.name != name))

    def with_object(self, obj: SqObject, pose: RigidTransform) -> Scene:
        """Scene with ``obj`` placed at ``pose`` (replacing any same-named object)."""
        rest = tuple((o, p) for o, p in self.objects if o.name != obj.name)
        return replace(self, objects=rest + ((obj, pose),))

    def with_obstacle(self, box: Box) -> Scene:
        return replace(self, obstacles=self.obstacles + (box,))


    @cached_property
    def _box_arrays(self):
        boxes = self.boxes
        C = np.array([b.center for b in boxes]).reshape(-1, 3)
        R = np.array([b.rotation for b in boxes]).reshape(-1, 3, 3)
        H = np.array([b.half_extents for b in boxes]).reshape(-1, 3)
        ext = np.einsum("bij,bj->bi", np.abs(R), H)
        return C, R, H, C - ext, C + ext

    @cached_property
    def _object_bodies(self) -> np.ndarray:
        out = np.zeros((len(self.objects), BODY_LEN))
        for k, (o, p) in enumerate(self.objects):
            out[k] = pack_body(o, p.rotation, p.translation)
        return out

    @cached_property
    def _static_arm_capsule(self):
        arm = self.arm
        p0 = arm.base_pose.apply(np.array([0.0, 0.0, arm.link_radii[0] + 0.015]))
        return p0, arm.shoulder_point

    def _skip_mask(self, names) -> np.ndarray:
        names = set(names)
        return np.array([o.name in names for o, _ in self.objects], dtype=np.bool_)


# ------------------------------------------------------------------ bodies
#
# A body is a flat float vector so the compiled kernels can take a 2-D array
# of them:  [kind, shape, radius, height, axis(3), base(3), top(3),
#            center(3), rotation(9, row-major), half(3), lo(3), hi(3)]
# kind 0 = capsule, 1 = box.

BODY_LEN = 34
_SHAPE_CODE = {name: k for k, name in enumerate(SHAPE_CLASSES)}


@njit(cache=True)
def _fill_body(shape, radius, height, R, t, out):
    axis = R[:, 2]
    top = t + height * axis
    center = t + 0.5 * height * axis
    out[0] = 1.0 if shape == 1 else 0.0
    out[1] = shape
    out[2] = radius
    out[3] = height
    out[4:7] = axis
    out[7:10] = t
    out[10:13] = top
    out[13:16] = center
    for i in range(3):
        for j in range(3):
            out[16 + 3 * i + j] = R[i, j]
    out[25] = radius
    out[26] = radius
    out[27] = 0.5 * height
    for i in range(3):
        if shape == 1:
            ext = (abs(R[i, 0]) + abs(R[i, 1])) * radius + abs(R[i, 2]) * 0.5 * height
            out[28 + i] = center[i] - ext
            out[31 + i] = center[i] + ext
        else:
            # half-width along world axis i of a disc of radius r with normal `axis`
            disc = radius * math.sqrt(max(1.0 - axis[i] * axis[i], 0.0))
            if shape == 2:  # cone: full disc at the base, apex at the top
                out[28 + i] = min(t[i] - disc, top[i])
                out[31 + i] = max(t[i] + disc, top[i])
            else:
                out[28 + i] = min(t[i], top[i]) - disc
                out[31 + i] = max(t[i], top[i]) + disc


def pack_body(obj: SqObject, R, t) -> np.ndarray:
    """Collision body vector of ``obj`` at pose (R, t)."""
    out = np.empty(BODY_LEN)
    _fill_body(
        _SHAPE_CODE[obj.shape_class], float(obj.radius), float(obj.height),
        np.ascontiguousarray(R, dtype=float), np.ascontiguousarray(t, dtype=float), out,
    )
    return out


@njit(cache=True)
def _axial_overlap(body, lo, hi, tol):
    """Does the interval [lo, hi] on the body axis reach into the body's height?"""
    b = body[4] * body[7] + body[5] * body[8] + body[6] * body[9]
    return hi - b > tol and lo - b < body[3] - tol


@njit(cache=True)
def _body_extent(body, axis):
    if body[0] == 1.0:
        return geo.box_extent_along(axis, body[13:16], body[16:25].reshape(3, 3), body[25:28])
    return geo.capsule_extent_along(axis, body[7:10], body[10:13], body[2])


@njit(cache=True)
def _aabb_overlap(alo, ahi, blo, bhi):
    for i in range(2):
        if alo[i] >= bhi[i] + 2 * MARGIN or ahi[i] <= blo[i] - 2 * MARGIN:
            return False
    return alo[2] < bhi[2] - REST_TOL and ahi[2] > blo[2] + REST_TOL


@njit(cache=True)
def _object_vs_box(body, C, R, H, blo, bhi):
    if not _aabb_overlap(body[28:31], body[31:34], blo, bhi):
        return False
    lo, hi = geo.box_extent_along(body[4:7], C, R, H)
    if not _axial_overlap(body, lo, hi, REST_TOL):
        return False
    if body[0] == 1.0:
        return geo.obb_overlap(body[13:16], body[16:25].reshape(3, 3), body[25:28] + MARGIN, C, R, H + MARGIN)
    d2 = geo.segment_box_dist2(body[7:10], body[10:13], C, R, H)
    return d2 < (body[2] + 2 * MARGIN) ** 2


@njit(cache=True)
def _object_vs_object(a, b):
    if not _aabb_overlap(a[28:31], a[31:34], b[28:31], b[31:34]):
        return False
    lo, hi = _body_extent(b, a[4:7])
    if not _axial_overlap(a, lo, hi, REST_TOL):
        return False
    lo, hi = _body_extent(a, b[4:7])
    if not _axial_overlap(b, lo, hi, REST_TOL):
        return False
    if a[0] == 1.0 and b[0] == 1.0:
        return geo.obb_overlap(
            a[13:16], a[16:25].reshape(3, 3), a[25:28] + MARGIN, b[13:16], b[16:25].reshape(3, 3), b[25:28] + MARGIN
        )
    if a[0] == 1.0 or b[0] == 1.0:
        box, cap = (a, b) if a[0] == 1.0 else (b, a)
        d2 = geo.segment_box_dist2(cap[7:10], cap[10:13], box[13:16], box[16:25].reshape(3, 3), box[25:28])
        return d2 < (cap[2] + 2 * MARGIN) ** 2
    d2 = geo.segment_segment_dist2(a[7:10], a[10:13], b[7:10], b[10:13])
    return d2 < (a[2] + b[2] + 2 * MARGIN) ** 2


@njit(cache=True)
def _capsule_vs_object(p0, p1, r, body):
    if body[0] == 1.0:
        d2 = geo.segment_box_dist2(p0, p1, body[13:16], body[16:25].reshape(3, 3), body[25:28])
        return d2 < (r + 2 * MARGIN) ** 2
    lo, hi = geo.capsule_extent_along(body[4:7], p0, p1, r + 2 * MARGIN)
    if not _axial_overlap(body, lo, hi, 0.0):
        return False
    d2 = geo.segment_segment_dist2(p0, p1, body[7:10], body[10:13])
    return d2 < (r + body[2] + 2 * MARGIN) ** 2


@njit(cache=True)
def _object_hit(body, bC, bR, bH, blo, bhi, bodies, skip):
    for b in range(bC.shape[0]):
        if _object_vs_box(body, bC[b], bR[b], bH[b], blo[b], bhi[b]):
            return True
    for k in range(bodies.shape[0]):
        if not skip[k] and _object_vs_object(body, bodies[k]):
            return True
    return False


@njit(cache=True)
def _arm_kernel(P0, P1, radii, self_i, self_j, bC, bR, bH, blo, bhi, bodies, arm_skip,
                held_shape, held_radius, held_height, HR, HT, held_skip, stop_first):
    n_cfg = P0.shape[0]
    out = np.zeros(n_cfg, dtype=np.bool_)
    body = np.empty(BODY_LEN)
    for n in range(n_cfg):
        hit = False
        for l in range(P0.shape[1]):
            r2 = (radii[l] + 2 * MARGIN) ** 2
            for b in range(bC.shape[0]):
                if geo.segment_box_dist2(P0[n, l], P1[n, l], bC[b], bR[b], bH[b]) < r2:
                    hit = True
                    break
            if hit:
                break
            for k in range(bodies.shape[0]):
                if not arm_skip[k] and _capsule_vs_object(P0[n, l], P1[n, l], radii[l], bodies[k]):
                    hit = True
                    break
            if hit:
                break
        if not hit:
            for m in range(self_i.shape[0]):
                i = self_i[m]
                j = self_j[m]
                d2 = geo.segment_segment_dist2(P0[n, i], P1[n, i], P0[n, j], P1[n, j])
                if d2 < (radii[i] + radii[j] + 2 * MARGIN) ** 2:
                    hit = True
                    break
        if not hit and held_shape >= 0:
            _fill_body(held_shape, held_radius, held_height, HR[n], HT[n], body)
            hit = _object_hit(body, bC, bR, bH, blo, bhi, bodies, held_skip)
        out[n] = hit
        if hit and stop_first:
            break
    return out


@njit(cache=True)
def _objects_kernel(shape, radius, height, HR, HT, bC, bR, bH, blo, bhi, bodies, skip):
    out = np.zeros(HR.shape[0], dtype=np.bool_)
    body = np.empty(BODY_LEN)
    for n in range(HR.shape[0]):
        _fill_body(shape, radius, height, HR[n], HT[n], body)
        out[n] = _object_hit(body, bC, bR, bH, blo, bhi, bodies, skip)
    return out


# ------------------------------------------------------------------ queries


def arm_capsules(arm: ArmModel, Q: np.ndarray, static=None):
    """Segment endpoints (N, 5, 3) x2 and radii (5,) of the arm links."""
    f = joint_frames(arm, Q)
    n = len(f["tool"])
    if static is None:
        static = (arm.base_pose.apply(np.array([0.0, 0.0, arm.link_radii[0] + 0.015])), arm.shoulder_point)
    b0 = np.broadcast_to(static[0], (n, 3))
    b1 = np.broadcast_to(static[1], (n, 3))
    sh = np.broadcast_to(f["shoulder"], (n, 3))
    p0 = np.stack([b0, sh, f["elbow"], f["wrist"], f["palm"]], axis=1)
    p1 = np.stack([b1, f["elbow"], f["wrist"], f["palm"], f["tool"]], axis=1)
    return p0, p1, np.array(arm.link_radii, dtype=float), f


_NO_POSE_R = np.zeros((0, 3, 3))
_NO_POSE_T = np.zeros((0, 3))


def arm_collision_batch(scene: Scene, Q: np.ndarray, held=None, ignore=(), stop_first: bool = False) -> np.ndarray:
    """Collision flags for a batch of configurations, shape (N,).

    With ``stop_first`` the scan ends at the first colliding configuration;
    later entries are then left ``False`` (unchecked).

    ``held`` is ``(obj, hand_to_object)`` with ``hand_to_object`` a
    :class:`RigidTransform`.  The held object rides at
    ``FK(q) @ hand_to_object``; it is tested against boxes and the other
    objects, never against the arm.  Objects named in ``ignore`` (and the held
    object itself) are skipped for arm tests.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p0, p1, radii, frames = arm_capsules(scene.arm, Q, scene._static_arm_capsule)
    skip = set(ignore)
    held_shape, held_r, held_h = -1, 0.0, 0.0
    HR, HT = _NO_POSE_R, _NO_POSE_T
    if held is not None:
        obj, h_T_o = held
        skip.add(obj.name)
        held_shape, held_r, held_h = _SHAPE_CODE[obj.shape_class], float(obj.radius), float(obj.height)
        Rw = frames["rotation"]
        HR = np.ascontiguousarray(Rw @ h_T_o.rotation)
        HT = np.ascontiguousarray(Rw @ h_T_o.translation + frames["tool"])
    arm_skip = scene._skip_mask(skip)
    held_skip = scene._skip_mask({held[0].name} if held is not None else ())
    return _arm_kernel(
        np.ascontiguousarray(p0), np.ascontiguousarray(p1), radii, _SELF_I, _SELF_J,
        *scene._box_arrays, scene._object_bodies, arm_skip,
        held_shape, held_r, held_h, HR, HT, held_skip, stop_first,
    )


def held_object_collision(scene: Scene, obj: SqObject, R, t, ignore=()) -> np.ndarray:
    """Object at pose(s) ``R`` (N, 3, 3), ``t`` (N, 3) against boxes and other objects."""
    R = np.ascontiguousarray(np.asarray(R, dtype=float).reshape(-1, 3, 3))
    t = np.ascontiguousarray(np.asarray(t, dtype=float).reshape(-1, 3))
    skip = scene._skip_mask(set(ignore) | {obj.name})
    return _objects_kernel(
        _SHAPE_CODE[obj.shape_class], float(obj.radius), float(obj.height), R, t,
        *scene._box_arrays, scene._object_bodies, skip,
    )


def arm_in_collision(scene: Scene, q, held=None, ignore=()) -> bool:
    """True if configuration ``q`` touches the scene (see :func:`arm_collision_batch`).

    ``held`` may pair the object with a :class:`~graspmetric.grasping.Grasp`
    or directly with the hand-to-object transform.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (7,) or not np.all(np.isfinite(q)):
        raise ValueError("q must be 7 finite joint values")
    if held is not None:
        obj, grasp = held
        held = (obj, getattr(grasp, "hand_to_object", grasp))
    return bool(arm_collision_batch(scene, q[None], held, ignore)[0])


def object_pose_in_collision(scene: Scene, obj: SqObject, pose: RigidTransform, ignore=()) -> bool:
    """True if ``obj`` at ``pose`` overlaps the table, an obstacle or another object."""
    return bool(held_object_collision(scene, obj, pose.rotation, pose.translation, ignore)[0])
