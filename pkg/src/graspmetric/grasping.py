"""Candidate grasps for symmetric tabletop objects and the grasp metric ``m_g``.

Hand frame convention: the tool point is the origin, +z is the approach
direction, and for side grasps +x points along the object's symmetry axis
(towards its top).  A grasp stores ``hand_to_object``, the object frame
expressed in the hand frame, so the hand pose for an object pose ``T`` is
``T @ hand_to_object.inverse()``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transforms import RigidTransform
from .world import SqObject

MAX_APERTURE = 0.10
SIDE_BANDS = (0.25, 0.50, 0.75)
# depth of the tool point below the top face for top grasps
TOP_GRASP_DEPTH = 0.04


@dataclass(frozen=True, eq=False)
class Grasp:
    hand_to_object: RigidTransform
    approach_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    approach_dir: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    preshape: str = "cylindrical"
    label: str = ""

    def __post_init__(self):
        p = np.array(self.approach_point, dtype=float).reshape(3)
        d = np.array(self.approach_dir, dtype=float).reshape(3)
        n = np.linalg.norm(d)
        if not np.isfinite(n) or n == 0:
            raise ValueError("approach_dir must be a non-zero vector")
        if abs(n - 1.0) > 1e-9:
            raise ValueError("approach_dir must have unit length")
        p.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "approach_point", p)
        object.__setattr__(self, "approach_dir", d)

    @property
    def object_to_hand(self) -> RigidTransform:
        """Hand pose expressed in the object frame."""
        return self.hand_to_object.inverse()

    def hand_pose(self, object_pose: RigidTransform) -> RigidTransform:
        return object_pose @ self.object_to_hand

    def object_pose(self, hand_pose: RigidTransform) -> RigidTransform:
        return hand_pose @ self.hand_to_object


def _hand_in_object(x_axis, z_axis, origin) -> RigidTransform:
    x = np.asarray(x_axis, float)
    z = np.asarray(z_axis, float)
    y = np.cross(z, x)
    return RigidTransform(np.column_stack([x, y, z]), origin)


def side_grasp(obj: SqObject, yaw: float, band: float) -> Grasp:
    """Horizontal grasp from direction ``yaw`` at ``band`` (fraction of height)."""
    radial = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    o_T_h = _hand_in_object([0.0, 0.0, 1.0], -radial, [0.0, 0.0, band * obj.height])
    return Grasp(o_T_h.inverse(), preshape="cylindrical", label=f"side:{band:.2f}:{yaw:.4f}")


def top_grasp(obj: SqObject, yaw: float) -> Grasp:
    """Grasp from above, approaching straight down the symmetry axis."""
    depth = min(TOP_GRASP_DEPTH, obj.height / 2)
    x = [np.cos(yaw), np.sin(yaw), 0.0]
    o_T_h = _hand_in_object(x, [0.0, 0.0, -1.0], [0.0, 0.0, obj.height - depth])
    return Grasp(o_T_h.inverse(), preshape="spherical", label=f"top:{yaw:.4f}")


def generate_grasps(obj: SqObject, side_count: int, top_count: int, max_aperture: float = MAX_APERTURE) -> list[Grasp]:
    """Deterministic candidate set: ``side_count`` yaws at each height band, then top grasps.

    Side grasps are ordered band by band (25%, 50%, 75%), each band sweeping
    yaw from 0.  Objects wider than ``max_aperture`` (compared with the
    radius) get no grasps.
    """
    if side_count < 0 or top_count < 0:
        raise ValueError("grasp counts must be non-negative")
    if obj.radius > max_aperture:
        return []
    grasps = []
    for band in SIDE_BANDS:
        for k in range(side_count):
            grasps.append(side_grasp(obj, 2 * np.pi * k / side_count, band))
    for k in range(top_count):
        grasps.append(top_grasp(obj, 2 * np.pi * k / top_count))
    return grasps


def grasp_metric(obj: SqObject, g: Grasp) -> float:
    """Distance from the centre of mass to the approach line (object frame, meters)."""
    o_T_h = g.object_to_hand
    p = o_T_h.apply(g.approach_point)
    d = o_T_h.apply_vector(g.approach_dir)
    return float(np.linalg.norm(np.cross(obj.com_array - p, d)) / np.linalg.norm(d))
