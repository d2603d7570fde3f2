"""Arm metric ``m_a``, the grouped ``m_ag`` ordering and its start/goal average.

``m_a`` counts collision-free IK solutions of the hand pose a grasp implies
at a given object pose.  ``m_ag`` is not a number but an ordering: grasps are
binned by ``m_a`` relative to the mean and population standard deviation of
the set, and sorted by ``m_g`` inside each bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grasping import Grasp, grasp_metric
from .kinematics import DEFAULT_PHI_SAMPLES, solution_sets
from .transforms import RigidTransform
from .world import Scene, SqObject, arm_collision_batch

GROUPS = ("very_good", "good", "fair", "bad")
_GROUP_RANK = {g: k for k, g in enumerate(GROUPS)}


# ------------------------------------------------------------------ m_a


def _hand_targets(grasps, object_poses):
    R = np.empty((len(grasps), 3, 3))
    p = np.empty((len(grasps), 3))
    for i, (g, pose) in enumerate(zip(grasps, object_poses)):
        hand = g.hand_pose(pose)
        R[i], p[i] = hand.rotation, hand.translation
    return R, p


def free_ik_solutions(
    scene: Scene,
    obj: SqObject,
    grasps: list[Grasp],
    object_poses,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
    held: bool = False,
) -> list[np.ndarray]:
    """Collision-free IK solutions per grasp, each an (n_i, 7) array.

    ``object_poses`` is one pose for all grasps or a list aligned with
    ``grasps``; ``None`` entries yield empty arrays.  The object itself is
    never an obstacle for the arm.  With ``held=True`` the object also rides
    in the hand and must clear the rest of the scene.
    """
    if isinstance(object_poses, RigidTransform) or object_poses is None:
        object_poses = [object_poses] * len(grasps)
    live = [i for i, p in enumerate(object_poses) if p is not None]
    out = [np.zeros((0, 7)) for _ in grasps]
    if not live:
        return out
    R, p = _hand_targets([grasps[i] for i in live], [object_poses[i] for i in live])
    sets = solution_sets(scene.arm, R, p, phi_samples)
    sizes = [len(s) for s in sets]
    if sum(sizes) == 0:
        return out
    Q = np.concatenate(sets)
    if held:
        # one grasp at a time: the held object's offset depends on the grasp
        hit = [
            arm_collision_batch(scene, s, held=(obj, grasps[i].hand_to_object)) if len(s) else np.zeros(0, bool)
            for i, s in zip(live, sets)
        ]
        free = ~np.concatenate(hit)
    else:
        free = ~arm_collision_batch(scene, Q, ignore=(obj.name,))
    start = 0
    for i, n in zip(live, sizes):
        out[i] = Q[start : start + n][free[start : start + n]]
        start += n
    return out


def arm_metrics(
    scene: Scene, obj: SqObject, grasps: list[Grasp], object_poses, phi_samples: int = DEFAULT_PHI_SAMPLES
) -> np.ndarray:
    """``m_a`` for every grasp (see :func:`free_ik_solutions` for ``object_poses``)."""
    sols = free_ik_solutions(scene, obj, grasps, object_poses, phi_samples)
    return np.array([len(s) for s in sols], dtype=int)


def arm_metric(
    scene: Scene, obj_pose: RigidTransform, obj: SqObject, g: Grasp, phi_samples: int = DEFAULT_PHI_SAMPLES
) -> int:
    """Number of collision-free IK solutions for grasping ``obj`` at ``obj_pose`` with ``g``."""
    return int(arm_metrics(scene, obj, [g], obj_pose, phi_samples)[0])


# ------------------------------------------------------------------ ordering


@dataclass(frozen=True)
class RankedEntry:
    grasp: Grasp
    m_a: float
    m_g: float
    group: str
    goal_guess: RigidTransform | None = None
    index: int = 0  # grasp id: position in the generated grasp list


@dataclass(frozen=True)
class RankedGraspSet:
    """Entries in input order plus the ``m_ag`` permutation over them."""

    entries: tuple = ()
    order: tuple = ()
    stats: tuple = (float("nan"), float("nan"))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, rank: int) -> RankedEntry:
        return self.entries[self.order[rank]]

    def ranked(self) -> list[RankedEntry]:
        return [self.entries[i] for i in self.order]

    @property
    def best(self) -> RankedEntry:
        return self[0]

    @property
    def worst(self) -> RankedEntry:
        return self[len(self) - 1]

    def group_members(self, group: str) -> list[RankedEntry]:
        return [e for e in self.ranked() if e.group == group]


def classify(values) -> tuple[list[str], float, float]:
    """Group labels for ``m_a`` values plus (mean, population std).

    Comparisons carry a relative tolerance so exact boundary cases (a value
    equal to the mean, say) survive floating-point rescaling.  A set with no
    spread is entirely ``fair``.
    """
    m = np.asarray(values, dtype=float)
    mu = float(m.mean())
    sigma = float(m.std())
    eps = 1e-10 * float(np.max(np.abs(m))) if len(m) else 0.0
    if sigma <= eps:
        return ["fair"] * len(m), mu, sigma
    groups = []
    for v in m:
        if v > mu + sigma + eps:
            groups.append("very_good")
        elif v > mu + eps:
            groups.append("good")
        elif v > mu - sigma + eps:
            groups.append("fair")
        else:
            groups.append("bad")
    return groups, mu, sigma


def rank_m_ag(entries) -> RankedGraspSet:
    """Order ``(grasp, m_a, m_g[, goal_guess[, index]])`` tuples by group then ``m_g``."""
    entries = list(entries)
    if not entries:
        raise ValueError("cannot rank an empty grasp set")
    groups, mu, sigma = classify([e[1] for e in entries])
    built = []
    for k, (e, grp) in enumerate(zip(entries, groups)):
        guess = e[3] if len(e) > 3 else None
        index = e[4] if len(e) > 4 else k
        built.append(RankedEntry(e[0], float(e[1]), float(e[2]), grp, guess, int(index)))
    order = sorted(range(len(built)), key=lambda i: (_GROUP_RANK[built[i].group], built[i].m_g, i))
    return RankedGraspSet(tuple(built), tuple(order), (mu, sigma))


def feature_scale(x) -> np.ndarray:
    """Affine map of ``x`` onto [0, 1]; a constant vector maps to zeros."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _ids(ids, n):
    return list(range(n)) if ids is None else [int(i) for i in ids]


def average_ranking(grasps, m_a_start, m_a_goal, m_g, goal_guesses, ids=None) -> RankedGraspSet:
    """Rank by scaled start ``m_a`` plus scaled goal ``m_a``.

    Every grasp takes part.  A grasp without a goal guess has no pose to
    reach at the goal and so no IK solutions there: its goal ``m_a`` counts
    as 0 whatever ``m_a_goal`` holds.  ``ids`` labels the grasps in the
    result (default: list positions).
    """
    ids = _ids(ids, len(grasps))
    if not len(grasps):
        return RankedGraspSet()
    goal = [0.0 if guess is None else float(v) for v, guess in zip(m_a_goal, goal_guesses)]
    s = feature_scale(np.asarray(m_a_start, float))
    g = feature_scale(np.asarray(goal, float))
    return rank_m_ag([(grasps[i], s[i] + g[i], m_g[i], goal_guesses[i], ids[i]) for i in range(len(grasps))])


def start_ranking(grasps, m_a_start, m_g, goal_guesses=None, ids=None) -> RankedGraspSet:
    """Rank at the start pose alone; every grasp is retained."""
    ids = _ids(ids, len(grasps))
    if goal_guesses is None:
        goal_guesses = [None] * len(grasps)
    return rank_m_ag([(g, m_a_start[i], m_g[i], goal_guesses[i], ids[i]) for i, g in enumerate(grasps)])


def goal_ranking(grasps, m_a_goal, m_g, goal_guesses, ids=None) -> RankedGraspSet:
    """Rank at each grasp's goal guess; grasps without a guess are dropped."""
    ids = _ids(ids, len(grasps))
    keep = [i for i, g in enumerate(goal_guesses) if g is not None]
    if not keep:
        return RankedGraspSet()
    return rank_m_ag([(grasps[i], m_a_goal[i], m_g[i], goal_guesses[i], ids[i]) for i in keep])


def rank_average(
    scene: Scene,
    obj: SqObject,
    grasps: list[Grasp],
    start_pose: RigidTransform,
    goal_guesses,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
) -> RankedGraspSet:
    """Average start/goal ranking, computing both ``m_a`` vectors in ``scene``."""
    if len(goal_guesses) != len(grasps):
        raise ValueError("goal_guesses must align with grasps")
    m_g = [grasp_metric(obj, g) for g in grasps]
    m_s = arm_metrics(scene, obj, grasps, start_pose, phi_samples)
    m_t = arm_metrics(scene.without_object(obj.name), obj, grasps, list(goal_guesses), phi_samples)
    return average_ranking(grasps, m_s, m_t, m_g, list(goal_guesses))
