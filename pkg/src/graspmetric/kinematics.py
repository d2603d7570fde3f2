"""Forward and analytic inverse kinematics for a 7-DOF S-R-S arm.

Chain (all angles in radians, lengths in meters)::

    T = Rz(q1) Tz(d_bs) Ry(q2) Rz(q3) Tz(d_se) Ry(q4) Rz(q5) Tz(d_ew) Ry(q6) Rz(q7) Tz(d_wt)

Joints 1-3 form the spherical shoulder centred on the shoulder point, joint 4
is the elbow, joints 5-7 the spherical wrist.  At ``q = 0`` the arm points
straight up and the tool frame equals the base frame shifted by the full arm
length along +z (the *home pose*).

The redundancy is resolved by the elbow angle ``phi``: the rotation of the
elbow point about the shoulder-wrist axis, measured from the half-plane that
contains the shoulder-wrist axis and the base +z axis.  For a fixed ``phi``
there are up to eight joint solutions (shoulder, elbow and wrist flips).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .transforms import RigidTransform, rot_y_batch, rot_z_batch, wrap_angle

JointConfig = np.ndarray

SINGULAR_EPS = 1e-4
DUPLICATE_TOL = 1e-6
DEFAULT_PHI_SAMPLES = 64

_EZ = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class ArmModel:
    """Geometry, limits and collision radii of the arm.

    ``link_lengths`` is (shoulder offset, upper arm, forearm, wrist-to-tool).
    The tool point sits between the fingertips; the palm is ``finger_length``
    behind it along the approach axis.
    """

    link_lengths: tuple = (0.30, 0.35, 0.30, 0.20)
    joint_limits: tuple = (
        (-2.96, 2.96),
        (-2.96, 2.96),
        (-2.96, 2.96),
        (0.1, 2.9),
        (-2.96, 2.96),
        (-2.96, 2.96),
        (-2.96, 2.96),
    )
    base_pose: RigidTransform = field(default_factory=RigidTransform)
    # base column, upper arm, forearm, hand, fingers
    link_radii: tuple = (0.065, 0.055, 0.05, 0.045, 0.015)
    finger_length: float = 0.08
    name: str = "generic7"

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.link_lengths)
        limits = tuple((float(lo), float(hi)) for lo, hi in self.joint_limits)
        if len(lengths) != 4 or len(limits) != 7:
            raise ValueError("need 4 link lengths and 7 joint limit pairs")
        if lengths[1] <= 0 or lengths[2] <= 0:
            raise ValueError("upper-arm and forearm lengths must be positive")
        if any(lo >= hi for lo, hi in limits):
            raise ValueError("joint limits must satisfy lower < upper")
        if len(self.link_radii) != 5 or min(self.link_radii) <= 0:
            raise ValueError("need 5 positive link radii")
        if not 0 < self.finger_length < lengths[3]:
            raise ValueError("finger_length must be inside the wrist-to-tool segment")
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "joint_limits", limits)
        object.__setattr__(self, "link_radii", tuple(float(r) for r in self.link_radii))

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.joint_limits])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.joint_limits])

    @property
    def shoulder_point(self) -> np.ndarray:
        """Shoulder centre in world coordinates."""
        return self.base_pose.apply(np.array([0.0, 0.0, self.link_lengths[0]]))

    @property
    def reach(self) -> float:
        """Shoulder-to-tool reach with the arm fully stretched."""
        return sum(self.link_lengths[1:])

    @property
    def home_pose(self) -> RigidTransform:
        return self.base_pose @ RigidTransform(np.eye(3), [0.0, 0.0, sum(self.link_lengths)])

    @property
    def ready_config(self) -> np.ndarray:
        """Elbow-bent rest posture used as the start and end of every task."""
        return np.array([0.0, -0.35, 0.0, 2.2, 0.0, -1.0, 0.0])

    def within_limits(self, q: JointConfig) -> bool:
        q = np.asarray(q)
        return bool(np.all(q >= self.lower) and np.all(q <= self.upper))


def check_phi(phi: float) -> float:
    phi = float(phi)
    if not -math.pi <= phi <= math.pi:
        raise ValueError(f"elbow angle {phi} outside [-pi, pi]")
    return phi


def phi_grid(phi_samples: int) -> np.ndarray:
    if phi_samples < 1:
        raise ValueError("phi_samples must be >= 1")
    return -np.pi + 2.0 * np.pi * np.arange(phi_samples) / phi_samples


# ---------------------------------------------------------------- forward


def joint_frames(arm: ArmModel, Q: np.ndarray) -> dict:
    """Key points and frames of a batch of configurations, in world coordinates.

    Returns a dict with ``shoulder`` (3,), and ``elbow``, ``wrist``, ``palm``,
    ``tool`` of shape (N, 3) plus ``rotation`` (N, 3, 3) of the tool frame.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    d_bs, d_se, d_ew, d_wt = arm.link_lengths
    Rz = rot_z_batch(Q[:, [0, 2, 4, 6]])
    Ry = rot_y_batch(Q[:, [1, 3, 5]])
    R2 = Rz[:, 0] @ Ry[:, 0]
    R4 = R2 @ Rz[:, 1] @ Ry[:, 1]
    R7 = R4 @ Rz[:, 2] @ Ry[:, 2] @ Rz[:, 3]
    S = np.array([0.0, 0.0, d_bs])
    E = S + d_se * R2[:, :, 2]
    W = E + d_ew * R4[:, :, 2]
    tool = W + d_wt * R7[:, :, 2]
    palm = tool - arm.finger_length * R7[:, :, 2]
    base = arm.base_pose
    out = {
        "shoulder": base.apply(S),
        "elbow": base.apply(E),
        "wrist": base.apply(W),
        "palm": base.apply(palm),
        "tool": base.apply(tool),
        "rotation": base.rotation @ R7,
    }
    return out


def fk_batch(arm: ArmModel, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tool rotations (N, 3, 3) and positions (N, 3) for a batch of configs."""
    f = joint_frames(arm, Q)
    return f["rotation"], f["tool"]


def forward_kinematics(arm: ArmModel, q: JointConfig) -> RigidTransform:
    q = np.asarray(q, dtype=float)
    if q.shape != (7,) or not np.all(np.isfinite(q)):
        raise ValueError("q must be 7 finite joint values")
    R, p = fk_batch(arm, q[None])
    return RigidTransform(R[0], p[0])


# ---------------------------------------------------------------- inverse

# branch b -> (shoulder sign, elbow sign, wrist sign)
BRANCH_SIGNS = np.array(
    [[1 - 2 * ((b >> 2) & 1), 1 - 2 * ((b >> 1) & 1), 1 - 2 * (b & 1)] for b in range(8)],
    dtype=float,
)


def ik_batch(arm: ArmModel, rotations: np.ndarray, positions: np.ndarray, phis: np.ndarray):
    """Analytic IK for M targets and P elbow angles at once.

    Returns ``(q, valid, degenerate)`` with shapes (M, P, 8, 7), (M, P, 8) and
    (M, P).  ``valid`` marks branches that exist, are non-degenerate and lie
    within the joint limits; ``degenerate`` marks (target, phi) pairs where at
    least one branch was skipped because of a singularity.
    """
    rotations = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    phis = np.asarray(phis, dtype=float).reshape(-1)
    M, P = len(positions), len(phis)
    d_bs, d_se, d_ew, d_wt = arm.link_lengths

    Rb = arm.base_pose.rotation.T @ rotations
    pb = (positions - arm.base_pose.translation) @ arm.base_pose.rotation
    W = pb - d_wt * Rb[:, :, 2]
    x = W - np.array([0.0, 0.0, d_bs])
    L = np.linalg.norm(x, axis=1)
    reachable = (L <= d_se + d_ew) & (L >= abs(d_se - d_ew)) & (L > 1e-12)
    Ls = np.where(reachable, L, 1.0)

    c4 = np.clip((Ls**2 - d_se**2 - d_ew**2) / (2 * d_se * d_ew), -1.0, 1.0)
    t4 = np.arccos(c4)
    ca = np.clip((d_se**2 + Ls**2 - d_ew**2) / (2 * d_se * Ls), -1.0, 1.0)
    sa = np.sqrt(1.0 - ca**2)
    u = x / Ls[:, None]
    v1 = _EZ - u[:, 2:3] * u
    n1 = np.linalg.norm(v1, axis=1)
    ref_degenerate = n1 < SINGULAR_EPS
    v1 = v1 / np.where(ref_degenerate, 1.0, n1)[:, None]
    v2 = np.cross(u, v1)
    elbow_degenerate = np.abs(np.sin(t4)) < SINGULAR_EPS

    cphi, sphi = np.cos(phis), np.sin(phis)
    # upper-arm direction a (M, P, 3), forearm direction f (M, P, 3)
    radial = cphi[None, :, None] * v1[:, None] + sphi[None, :, None] * v2[:, None]
    a = ca[:, None, None] * u[:, None] + sa[:, None, None] * radial
    E = d_se * a
    f = (x[:, None] - E) / d_ew

    sh = BRANCH_SIGNS[:, 0]
    el = BRANCH_SIGNS[:, 1]
    wr = BRANCH_SIGNS[:, 2]

    # shoulder
    az = np.clip(a[..., 2], -1.0, 1.0)
    t2_abs = np.arccos(az)  # (M, P)
    s2_abs = np.sin(t2_abs)
    t2 = sh[None, None, :] * t2_abs[..., None]  # (M, P, 8)
    t1 = np.arctan2(sh * a[..., 1:2], sh * a[..., 0:1])
    R2 = rot_z_batch(t1) @ rot_y_batch(t2)  # (M, P, 8, 3, 3)
    g = np.einsum("mpbji,mpj->mpbi", R2, f)
    t4b = el[None, None, :] * t4[:, None, None]
    s4 = np.sin(t4b)
    s4_safe = np.where(np.abs(s4) < 1e-300, 1.0, s4)
    t3 = np.arctan2(g[..., 1] / s4_safe, g[..., 0] / s4_safe)
    R4 = R2 @ rot_z_batch(t3) @ rot_y_batch(t4b)
    Mw = np.swapaxes(R4, -1, -2) @ Rb[:, None, None]
    m22 = np.clip(Mw[..., 2, 2], -1.0, 1.0)
    t6_abs = np.arccos(m22)
    s6_abs = np.sin(t6_abs)
    t6 = wr[None, None, :] * t6_abs
    s6 = np.where(wr > 0, 1.0, -1.0)[None, None, :]
    t5 = np.arctan2(s6 * Mw[..., 1, 2], s6 * Mw[..., 0, 2])
    t7 = np.arctan2(s6 * Mw[..., 2, 1], -s6 * Mw[..., 2, 0])

    q = np.stack(np.broadcast_arrays(t1, t2, t3, t4b, t5, t6, t7), axis=-1)
    q = wrap_angle(q)

    singular = (
        elbow_degenerate[:, None, None]
        | ref_degenerate[:, None, None]
        | (s2_abs[..., None] < SINGULAR_EPS)
        | (s6_abs < SINGULAR_EPS)
    )
    in_limits = np.all((q >= arm.lower) & (q <= arm.upper), axis=-1)
    exists = np.broadcast_to(reachable[:, None, None], (M, P, 8))
    valid = exists & ~singular & in_limits
    degenerate = np.any(exists & singular, axis=-1)
    return q, valid, degenerate


class IKSolutions(list):
    """List of joint configurations carrying a ``degenerate`` flag.

    The flag is set when a branch was dropped because the target sits within
    ``SINGULAR_EPS`` of a kinematic singularity.
    """

    def __init__(self, items=(), degenerate: bool = False):
        super().__init__(items)
        self.degenerate = degenerate


def _target_arrays(target: RigidTransform):
    return target.rotation[None], target.translation[None]


def analytic_ik(arm: ArmModel, target: RigidTransform, phi: float) -> IKSolutions:
    """All in-limit joint solutions reaching ``target`` for one elbow angle."""
    phi = check_phi(phi)
    R, p = _target_arrays(target)
    q, valid, degenerate = ik_batch(arm, R, p, np.array([phi]))
    sols = [q[0, 0, b].copy() for b in range(8) if valid[0, 0, b]]
    return IKSolutions(sols, degenerate=bool(degenerate[0, 0]))


@njit(cache=True)
def _duplicate_mask(Q, tol):
    n = Q.shape[0]
    keep = np.ones(n, dtype=np.bool_)
    for i in range(n):
        if not keep[i]:
            continue
        for j in range(i + 1, n):
            if not keep[j]:
                continue
            same = True
            for k in range(Q.shape[1]):
                if abs(Q[j, k] - Q[i, k]) > tol:
                    same = False
                    break
            if same:
                keep[j] = False
    return keep


def dedupe_configs(Q: np.ndarray, tol: float = DUPLICATE_TOL) -> np.ndarray:
    """Drop configurations within ``tol`` (per joint) of an earlier one.

    Keeps first occurrences in input order.
    """
    Q = np.ascontiguousarray(Q, dtype=float).reshape(-1, 7)
    if len(Q) < 2:
        return Q.copy()
    return Q[_duplicate_mask(Q, float(tol))]


def solution_sets(arm: ArmModel, rotations, positions, phi_samples: int) -> list[np.ndarray]:
    """De-duplicated IK solution arrays for several targets over the phi grid."""
    q, valid, _ = ik_batch(arm, rotations, positions, phi_grid(phi_samples))
    return [dedupe_configs(q[m][valid[m]]) for m in range(len(q))]


def ik_solution_set(
    arm: ArmModel, target: RigidTransform, phi_samples: int = DEFAULT_PHI_SAMPLES
) -> list[JointConfig]:
    """Union of :func:`analytic_ik` over an even phi grid starting at -pi."""
    R, p = _target_arrays(target)
    return list(solution_sets(arm, R, p, phi_samples)[0])


def config_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean joint-space distance (broadcasting)."""
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)
