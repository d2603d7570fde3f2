"""Rigid transforms in SE(3).

A :class:`RigidTransform` maps points expressed in a *from* frame into a *to*
frame: ``p_to = R @ p_from + t``.  Composition follows the usual convention,
``(A @ B)(p) == A(B(p))``, so ``world_T_hand @ hand_T_object`` gives the object
pose in the world.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_z_batch(a: np.ndarray) -> np.ndarray:
    """Stack of z rotations, shape ``a.shape + (3, 3)``."""
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def rot_y_batch(a: np.ndarray) -> np.ndarray:
    """Stack of y rotations, shape ``a.shape + (3, 3)``."""
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 2] = s
    out[..., 2, 0] = -s
    out[..., 2, 2] = c
    out[..., 1, 1] = 1.0
    return out


def rotation_angle(R: np.ndarray) -> float:
    """Angle of the rotation ``R`` (radians, in [0, pi])."""
    # acos is ill-conditioned near 0; the axis-angle norm via the skew part is not.
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(0.5 * np.linalg.norm(skew), 0.5 * (np.trace(R) - 1.0)))


def wrap_angle(a):
    """Wrap angles into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return w if np.ndim(w) else float(w)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> RigidTransform:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_xyz_yaw(cls, x: float, y: float, z: float, yaw: float = 0.0) -> RigidTransform:
        return cls(rot_z(yaw), [x, y, z])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points (shape (3,) or (N, 3)) from the source frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def apply_vector(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.rotation.T

    def with_translation(self, t) -> RigidTransform:
        return RigidTransform(self.rotation, t)

    def distance_to(self, other: RigidTransform) -> tuple[float, float]:
        """(position error in meters, orientation error in radians)."""
        dp = float(np.linalg.norm(self.translation - other.translation))
        return dp, rotation_angle(self.rotation.T @ other.rotation)

    def isclose(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        dp, da = self.distance_to(other)
        return dp <= atol and da <= atol

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.4f}" for v in self.translation)
        return f"RigidTransform(t=[{t}], R={self.rotation.round(4).tolist()})"
