"""Two-step tasks and their goal-pose guesses.

Pick-and-place asks for an upright object at a goal position with free yaw.
The guess for each grasp rotates the start orientation towards the
*referential rotation* (the table-plane angle swept by the object as seen
from the shoulder) and keeps the smallest rotation that works.

Pouring places the hand beside the receiver's rim with the approach
direction tangent to it, then tilts the pourer with a last-joint roll.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grasping import Grasp
from .kinematics import DEFAULT_PHI_SAMPLES, ArmModel, joint_frames
from .metrics import free_ik_solutions
from .transforms import RigidTransform, rot_z
from .world import Scene, SqObject, arm_collision_batch, held_object_collision, object_pose_in_collision

DEFAULT_N_STEPS = 8
DEFAULT_N_THETA = 16
DEFAULT_CLEARANCE = 0.05
PLACE_TOLERANCE = 0.02
MAX_TILT = math.radians(30.0)
TILT_STEP = math.radians(1.0)


@dataclass(frozen=True)
class PickPlaceTask:
    obj: SqObject
    start_pose: RigidTransform
    goal_position: np.ndarray
    upright_required: bool = True
    success_tolerance: float = PLACE_TOLERANCE

    def __post_init__(self):
        object.__setattr__(self, "goal_position", np.asarray(self.goal_position, dtype=float).reshape(3))


@dataclass(frozen=True)
class PouringTask:
    pourer: SqObject
    pourer_start: RigidTransform
    receiver: SqObject
    receiver_pose: RigidTransform
    tilt_range: tuple = (0.0, -MAX_TILT)

    def __post_init__(self):
        hi, lo = self.tilt_range
        if not (-MAX_TILT - 1e-12 <= lo <= hi <= 1e-12):
            raise ValueError("tilt_range must lie within [0, -30] degrees")

    @property
    def receiver_center(self) -> np.ndarray:
        return self.receiver_pose.translation


# ------------------------------------------------------------------ pick-and-place


def referential_rotation(arm: ArmModel, start: RigidTransform, goal_pos) -> float:
    """Signed table-plane angle from shoulder->start to shoulder->goal, in (-pi, pi]."""
    sh = arm.shoulder_point
    vs = (start.translation - sh)[:2]
    vg = (np.asarray(goal_pos, dtype=float) - sh)[:2]
    if np.linalg.norm(vs) < 1e-12 or np.linalg.norm(vg) < 1e-12:
        raise ValueError("start or goal projects onto the shoulder; rotation undefined")
    ang = math.atan2(vs[0] * vg[1] - vs[1] * vg[0], vs[0] * vg[0] + vs[1] * vg[1])
    return math.pi if ang == -math.pi else ang


def candidate_goal_poses(arm: ArmModel, task: PickPlaceTask, n_steps: int) -> list[RigidTransform]:
    """Goal poses for rotation fractions 0, 1/n, ..., 1 of the referential rotation."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    turn = referential_rotation(arm, task.start_pose, task.goal_position)
    R0 = task.start_pose.rotation
    return [RigidTransform(rot_z(turn * i / n_steps) @ R0, task.goal_position) for i in range(n_steps + 1)]


def goal_pose_indices(
    scene: Scene,
    task: PickPlaceTask,
    grasps: list[Grasp],
    n_steps: int = DEFAULT_N_STEPS,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
) -> list[int | None]:
    """Index of the first feasible rotation step for each grasp (``None`` if none)."""
    poses = candidate_goal_poses(scene.arm, task, n_steps)
    at_goal = scene.without_object(task.obj.name)
    chosen: list[int | None] = [None] * len(grasps)
    pending = list(range(len(grasps)))
    for i, pose in enumerate(poses):
        if not pending:
            break
        if object_pose_in_collision(at_goal, task.obj, pose):
            continue
        sols = free_ik_solutions(at_goal, task.obj, [grasps[k] for k in pending], pose, phi_samples)
        for k, s in zip(list(pending), sols):
            if len(s):
                chosen[k] = i
                pending.remove(k)
    return chosen


def goal_pose_guesses(
    scene: Scene,
    task: PickPlaceTask,
    grasps: list[Grasp],
    n_steps: int = DEFAULT_N_STEPS,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
) -> list[RigidTransform | None]:
    """Object goal pose per grasp using the smallest feasible rotation, or ``None``."""
    poses = candidate_goal_poses(scene.arm, task, n_steps)
    idx = goal_pose_indices(scene, task, grasps, n_steps, phi_samples)
    return [None if i is None else poses[i] for i in idx]


# ------------------------------------------------------------------ pouring


def pouring_hand_pose(task: PouringTask, angle: float, clearance: float = DEFAULT_CLEARANCE) -> RigidTransform:
    """Hand pose beside the receiver rim at ``angle`` radians, approach tangent to the rim."""
    r_m = 0.5 * task.receiver.radius + task.pourer.radius
    c, s = math.cos(angle), math.sin(angle)
    p = task.receiver_center + np.array([r_m * c, r_m * s, task.receiver.height + clearance])
    x = np.array([-c, -s, 0.0])
    z = np.array([s, -c, 0.0])
    y = np.cross(z, x)
    return RigidTransform(np.column_stack([x, y, z]), p)


def pouring_rim_guesses(
    scene: Scene,
    task: PouringTask,
    n_theta: int = DEFAULT_N_THETA,
    clearance: float = DEFAULT_CLEARANCE,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
) -> list[tuple[int, float, RigidTransform]]:
    """Retained ``(index, angle, hand_pose)`` triples: those with a collision-free IK solution."""
    if n_theta < 1:
        raise ValueError("n_theta must be >= 1")
    if clearance < 0:
        raise ValueError("clearance must be non-negative")
    at_goal = scene.without_object(task.pourer.name)
    angles = [2 * math.pi * i / n_theta for i in range(n_theta)]
    hands = [pouring_hand_pose(task, ang, clearance) for ang in angles]
    # the hand pose is the target itself: an identity grasp of a stand-in object
    ident = Grasp(RigidTransform.identity())
    sols = free_ik_solutions(at_goal, task.pourer, [ident] * n_theta, hands, phi_samples)
    return [(i, angles[i], hands[i]) for i in range(n_theta) if len(sols[i])]


def pouring_goal_guesses(
    scene: Scene,
    task: PouringTask,
    n_theta: int = DEFAULT_N_THETA,
    clearance: float = DEFAULT_CLEARANCE,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
) -> list[RigidTransform]:
    """Hand poses around the receiver rim that the arm can reach without collision."""
    return [h for _, _, h in pouring_rim_guesses(scene, task, n_theta, clearance, phi_samples)]


def pourer_goal_guesses(
    scene: Scene,
    task: PouringTask,
    grasps: list[Grasp],
    hand_guesses: list[RigidTransform],
    m_a_per_guess=None,
) -> list[RigidTransform | None]:
    """Pourer pose per grasp: the best-scoring hand guess whose held pourer is collision-free.

    ``m_a_per_guess`` ranks the hand guesses (highest first, ties by position);
    without it the first feasible guess wins.
    """
    at_goal = scene.without_object(task.pourer.name)
    order = list(range(len(hand_guesses)))
    if m_a_per_guess is not None:
        order.sort(key=lambda k: (-m_a_per_guess[k], k))
    out: list[RigidTransform | None] = []
    for g in grasps:
        pick = None
        for k in order:
            pose = g.object_pose(hand_guesses[k])
            if not object_pose_in_collision(at_goal, task.pourer, pose):
                pick = pose
                break
        out.append(pick)
    return out


def _top_inside_opening(task: PouringTask, R: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Is the pourer's top-rim centre above the receiver's opening disc (projected)?"""
    top = t + task.pourer.height * R[:, :, 2]
    d = np.linalg.norm(top[:, :2] - task.receiver_center[:2], axis=1)
    return d <= task.receiver.radius


def tilt_sweep(scene: Scene, task: PouringTask, q_goal, grasp: Grasp, tilt: float = MAX_TILT):
    """Last-joint roll from ``q_goal`` that lowers the pourer's top by ``tilt``.

    Returns the swept configurations (1 degree apart, ``q_goal`` first) if
    the whole sweep is within limits, collision-free and ends with the
    pourer axis inside the tilt range, otherwise ``None``.  The pourer may
    dip into the receiver while its top stays over the opening; the arm may
    not touch the receiver.
    """
    arm = scene.arm
    q_goal = np.asarray(q_goal, dtype=float)
    n = int(math.ceil(abs(tilt) / TILT_STEP - 1e-9))
    steps = np.linspace(0.0, abs(tilt), n + 1)
    h_T_o = grasp.hand_to_object

    def object_axis(Q):
        f = joint_frames(arm, Q)
        R = f["rotation"] @ h_T_o.rotation
        t = f["rotation"] @ h_T_o.translation + f["tool"]
        return R, t

    sign = 1.0
    if n > 0:
        R, _ = object_axis(np.array([q_goal, q_goal + [0, 0, 0, 0, 0, 0, TILT_STEP]]))
        if R[1, 2, 2] > R[0, 2, 2] + 1e-12:
            sign = -1.0
    Q = np.repeat(q_goal[None], n + 1, axis=0)
    Q[:, 6] += sign * steps
    if not np.all((Q >= arm.lower) & (Q <= arm.upper)):
        return None
    R, t = object_axis(Q)
    elevation = np.arcsin(np.clip(R[-1, 2, 2], -1.0, 1.0))
    lo, hi = min(task.tilt_range), max(task.tilt_range)
    if not lo - 1e-9 <= elevation <= hi + 1e-9:
        return None
    if not np.all(_top_inside_opening(task, R, t)):
        return None
    scene = scene.without_object(task.pourer.name)
    others = scene.without_object(task.receiver.name)
    if np.any(arm_collision_batch(scene, Q)):
        return None
    if np.any(held_object_collision(others, task.pourer, R, t)):
        return None
    return Q


def check_tilt_feasible(scene: Scene, task: PouringTask, q_goal, grasp: Grasp, tilt: float = MAX_TILT) -> bool:
    """Can the pourer be tilted by ``tilt`` from ``q_goal`` (see :func:`tilt_sweep`)?"""
    return tilt_sweep(scene, task, q_goal, grasp, tilt) is not None
