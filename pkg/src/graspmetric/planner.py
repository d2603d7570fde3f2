"""Joint-space RRT-Connect and task execution.

Edges are validated by checking interpolated configurations at most
``RESOLUTION`` radians apart.  Planning effort is measured in tree nodes,
which is deterministic for a fixed seed, and in wall-clock seconds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kinematics import DEFAULT_PHI_SAMPLES, forward_kinematics, joint_frames
from .metrics import RankedGraspSet, free_ik_solutions
from .tasks import PickPlaceTask, PouringTask, tilt_sweep
from .world import Scene, arm_collision_batch

GOAL_BIAS = 0.1
STEP = 0.1
RESOLUTION = 0.02
DEFAULT_BUDGET = 50_000
MODES = ("start", "goal", "average")


@dataclass(frozen=True, eq=False)
class JointPath:
    waypoints: tuple
    resolution: float = RESOLUTION

    def __post_init__(self):
        wps = tuple(np.asarray(w, dtype=float).reshape(7) for w in self.waypoints)
        if not wps:
            raise ValueError("a path needs at least one waypoint")
        object.__setattr__(self, "waypoints", wps)

    def __len__(self) -> int:
        return len(self.waypoints)

    def as_array(self) -> np.ndarray:
        return np.array(self.waypoints)

    def dense(self, resolution: float | None = None) -> np.ndarray:
        """All waypoints plus interpolated configurations at most ``resolution`` apart."""
        res = self.resolution if resolution is None else resolution
        W = self.as_array()
        parts = [W[:1]]
        for a, b in zip(W[:-1], W[1:]):
            parts.append(interpolate(a, b, res)[1:])
        return np.concatenate(parts)


@dataclass(frozen=True)
class PlanResult:
    path: JointPath | None
    nodes: int
    wall_s: float

    @property
    def success(self) -> bool:
        return self.path is not None


def interpolate(a, b, resolution: float = RESOLUTION) -> np.ndarray:
    """Straight joint-space segment from ``a`` to ``b`` inclusive, steps <= ``resolution``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(1, int(math.ceil(np.max(np.abs(b - a)) / resolution - 1e-12)))
    return a + np.linspace(0.0, 1.0, n + 1)[:, None] * (b - a)


class _Validity:
    """Batched state checker for one (scene, held, ignore) context."""

    def __init__(self, scene: Scene, held=None, ignore=()):
        self.scene = scene
        self.held = held
        self.ignore = tuple(ignore)
        self.lower = scene.arm.lower
        self.upper = scene.arm.upper

    def __call__(self, Q: np.ndarray) -> np.ndarray:
        Q = np.atleast_2d(Q)
        ok = np.all((Q >= self.lower) & (Q <= self.upper), axis=1)
        if ok.any():
            ok[ok] = ~arm_collision_batch(self.scene, Q[ok], self.held, self.ignore)
        return ok

    def first_invalid(self, Q: np.ndarray) -> int:
        """Index of the first invalid row of ``Q`` (``len(Q)`` if all valid)."""
        Q = np.atleast_2d(Q)
        out = np.flatnonzero(~np.all((Q >= self.lower) & (Q <= self.upper), axis=1))
        n = int(out[0]) if len(out) else len(Q)
        if n == 0:
            return 0
        hit = np.flatnonzero(arm_collision_batch(self.scene, Q[:n], self.held, self.ignore, stop_first=True))
        return int(hit[0]) if len(hit) else n


class _Tree:
    def __init__(self, root: np.ndarray, capacity: int):
        self.nodes = np.empty((capacity, 7))
        self.parent = np.empty(capacity, dtype=np.int64)
        self.nodes[0] = root
        self.parent[0] = -1
        self.size = 1

    def add(self, q: np.ndarray, parent: int) -> int:
        self.nodes[self.size] = q
        self.parent[self.size] = parent
        self.size += 1
        return self.size - 1

    def nearest(self, q: np.ndarray) -> int:
        d = self.nodes[: self.size] - q
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def branch(self, i: int) -> list[np.ndarray]:
        """Configurations from node ``i`` back to the root."""
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = int(self.parent[i])
        return out


def rrt_connect(
    scene: Scene,
    q_start,
    q_goal,
    held=None,
    budget: int = DEFAULT_BUDGET,
    seed=0,
    ignore=(),
    step: float = STEP,
    goal_bias: float = GOAL_BIAS,
    resolution: float = RESOLUTION,
) -> PlanResult:
    """Bidirectional RRT with greedy connection; tries the direct segment first.

    ``budget`` caps the total number of tree nodes (both trees, roots
    included).  ``held`` and ``ignore`` are passed to the collision checker.
    """
    t0 = time.perf_counter()
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    valid = _Validity(scene, held, ignore)

    def done(path, nodes):
        jp = None if path is None else JointPath(tuple(path), resolution)
        return PlanResult(jp, nodes, time.perf_counter() - t0)

    if np.max(np.abs(q_goal - q_start)) <= 1e-12:
        return done([q_start], 1)
    direct = interpolate(q_start, q_goal, resolution)
    if valid.first_invalid(direct) == len(direct):
        return done([q_start, q_goal], 2)
    if budget < 2:
        return done(None, 1)

    rng = np.random.default_rng(seed)
    lower, upper = scene.arm.lower, scene.arm.upper
    ta, tb = _Tree(q_start, budget), _Tree(q_goal, budget)
    a_is_start = True
    while ta.size + tb.size < budget:
        target = tb.nodes[0] if rng.random() < goal_bias else rng.uniform(lower, upper)
        i_near = ta.nearest(target)
        q_near = ta.nodes[i_near]
        delta = target - q_near
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            ta, tb, a_is_start = tb, ta, not a_is_start
            continue
        q_new = q_near + delta * min(1.0, step / dist)
        edge = interpolate(q_near, q_new, resolution)
        if valid.first_invalid(edge) == len(edge):
            i_new = ta.add(q_new, i_near)
            i_b = _connect(tb, q_new, valid, step, resolution, budget - ta.size - tb.size)
            if i_b is not None:
                a_branch = ta.branch(i_new)[::-1]
                b_branch = tb.branch(i_b)
                path = a_branch + b_branch[1:] if np.allclose(b_branch[0], q_new) else a_branch + b_branch
                if not a_is_start:
                    path = path[::-1]
                return done(path, ta.size + tb.size)
        ta, tb, a_is_start = tb, ta, not a_is_start
    return done(None, ta.size + tb.size)


def _connect(tree: _Tree, target: np.ndarray, valid: _Validity, step: float, resolution: float, room: int):
    """Grow ``tree`` straight towards ``target`` in ``step`` increments.

    All increments are validated in one batch; the valid prefix is added
    (at most ``room`` nodes).  Returns the node index at ``target`` when it
    was reached, else ``None``.
    """
    i = tree.nearest(target)
    q = tree.nodes[i]
    delta = target - q
    dist = float(np.linalg.norm(delta))
    n_steps = max(1, int(math.ceil(dist / step - 1e-12)))
    n_dense = max(1, int(math.ceil(np.max(np.abs(delta)) / resolution - 1e-12)))
    stop_frac = np.arange(1, n_steps + 1) / n_steps
    frac = np.union1d(np.arange(1, n_dense + 1) / n_dense, stop_frac)
    k = valid.first_invalid(q + frac[:, None] * delta)
    bad = frac[k] if k < len(frac) else np.inf
    reached = min(int(np.count_nonzero(stop_frac < bad)), room)
    for s in range(reached):
        i = tree.add(q + stop_frac[s] * delta, i)
    return i if reached == n_steps else None


def hand_displacement(scene: Scene, paths, resolution: float = RESOLUTION) -> float:
    """Summed tool-point chord length along ``paths`` sampled at ``resolution``."""
    total = 0.0
    for p in paths:
        Q = p.dense(resolution) if isinstance(p, JointPath) else np.asarray(p, dtype=float)
        if len(Q) < 2:
            continue
        tool = joint_frames(scene.arm, Q)["tool"]
        total += float(np.sum(np.linalg.norm(np.diff(tool, axis=0), axis=1)))
    return total


def path_is_valid(scene: Scene, path: JointPath, held=None, ignore=(), resolution: float = RESOLUTION) -> bool:
    """Independent re-check of every segment at ``resolution``."""
    valid = _Validity(scene, held, ignore)
    Q = path.dense(resolution)
    return bool(np.all(valid(Q)))


def plan_rrt(scene: Scene, q_start, q_goal, held=None, budget: int = DEFAULT_BUDGET, seed=0, ignore=()):
    """Collision-free joint path from ``q_start`` to ``q_goal`` or ``None`` within ``budget`` nodes."""
    return rrt_connect(scene, q_start, q_goal, held=held, budget=budget, seed=seed, ignore=ignore).path


# ------------------------------------------------------------------ execution


@dataclass(frozen=True)
class TaskOutcome:
    success: bool
    hand_displacement: float
    nodes: int
    wall_s: float
    stage: str
    grasp_index: int = -1
    group: str = ""
    paths: tuple = field(default=(), repr=False)


def _stage_seed(seed, stage: int):
    return np.random.SeedSequence([int(s) for s in np.atleast_1d(seed)] + [stage])


def _closest(solutions: np.ndarray, q_ref: np.ndarray) -> np.ndarray:
    return solutions[int(np.argmin(np.linalg.norm(solutions - q_ref, axis=1)))]


def execute_task(
    scene: Scene,
    task,
    ranked: RankedGraspSet,
    mode: str = "average",
    pick_rank: int = 0,
    budget: int = DEFAULT_BUDGET,
    seed=0,
    phi_samples: int = DEFAULT_PHI_SAMPLES,
) -> TaskOutcome:
    """Run the task with the grasp at ``pick_rank`` of ``ranked``.

    Pick-and-place plans reach, transport and retreat to the ready posture;
    pouring plans reach and transport, then sweeps the tilt.  Nothing else is
    tried when a stage fails.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if len(ranked) == 0:
        raise ValueError("ranked grasp set is empty")
    if not 0 <= pick_rank < len(ranked):
        raise ValueError("pick_rank out of range")
    entry = ranked[pick_rank]
    if isinstance(task, PickPlaceTask):
        return _execute_pick_place(scene, task, entry, budget, seed, phi_samples)
    if isinstance(task, PouringTask):
        return _execute_pour(scene, task, entry, budget, seed, phi_samples)
    raise TypeError(f"unsupported task type {type(task).__name__}")


class _Run:
    """Accumulates plans of one execution."""

    def __init__(self, scene, entry):
        self.scene = scene
        self.entry = entry
        self.nodes = 0
        self.wall = 0.0
        self.paths = []

    def plan(self, scene, a, b, budget, seed, stage, held=None, ignore=()):
        res = rrt_connect(scene, a, b, held=held, budget=budget, seed=_stage_seed(seed, stage), ignore=ignore)
        self.nodes += res.nodes
        self.wall += res.wall_s
        if res.path is not None:
            self.paths.append(res.path)
        return res.path

    def outcome(self, success, stage, extra=()):
        paths = tuple(self.paths) + tuple(extra)
        disp = hand_displacement(self.scene, paths) if success else float("nan")
        return TaskOutcome(success, disp, self.nodes, self.wall, stage, self.entry.index, self.entry.group, paths)


def _reach(run: _Run, scene, obj, grasp, pose, budget, seed, phi_samples):
    ready = scene.arm.ready_config
    sols = free_ik_solutions(scene, obj, [grasp], pose, phi_samples)[0]
    if not len(sols):
        return None
    q_grasp = _closest(sols, ready)
    if run.plan(scene, ready, q_grasp, budget, seed, 0, ignore=(obj.name,)) is None:
        return None
    return q_grasp


def _execute_pick_place(scene, task: PickPlaceTask, entry, budget, seed, phi_samples) -> TaskOutcome:
    run = _Run(scene, entry)
    obj, g = task.obj, entry.grasp
    q_grasp = _reach(run, scene, obj, g, task.start_pose, budget, seed, phi_samples)
    if q_grasp is None:
        return run.outcome(False, "reach")
    goal = entry.goal_guess
    if goal is None:
        return run.outcome(False, "transport")
    moving = scene.without_object(obj.name)
    sols = free_ik_solutions(moving, obj, [g], goal, phi_samples, held=True)[0]
    if not len(sols):
        return run.outcome(False, "transport")
    q_place = _closest(sols, q_grasp)
    held = (obj, g.hand_to_object)
    if run.plan(moving, q_grasp, q_place, budget, seed, 1, held=held) is None:
        return run.outcome(False, "transport")
    placed = moving.with_object(obj, goal)
    if run.plan(placed, q_place, scene.arm.ready_config, budget, seed, 2, ignore=(obj.name,)) is None:
        return run.outcome(False, "retreat")
    final = forward_kinematics(scene.arm, q_place) @ g.hand_to_object
    err = np.linalg.norm(final.translation - task.goal_position)
    upright = final.rotation[2, 2] > 1.0 - 1e-6 or not task.upright_required
    if err > task.success_tolerance or not upright:
        return run.outcome(False, "place")
    return run.outcome(True, "done")


def _execute_pour(scene, task: PouringTask, entry, budget, seed, phi_samples) -> TaskOutcome:
    run = _Run(scene, entry)
    obj, g = task.pourer, entry.grasp
    q_grasp = _reach(run, scene, obj, g, task.pourer_start, budget, seed, phi_samples)
    if q_grasp is None:
        return run.outcome(False, "reach")
    goal = entry.goal_guess
    if goal is None:
        return run.outcome(False, "transport")
    moving = scene.without_object(obj.name)
    sols = free_ik_solutions(moving, obj, [g], goal, phi_samples, held=True)[0]
    if not len(sols):
        return run.outcome(False, "transport")
    sols = sols[np.argsort(np.linalg.norm(sols - q_grasp, axis=1), kind="stable")]
    sweep = None
    for q in sols:
        sweep = tilt_sweep(scene, task, q, g)
        if sweep is not None:
            break
    if sweep is None:
        return run.outcome(False, "tilt")
    held = (obj, g.hand_to_object)
    if run.plan(moving, q_grasp, sweep[0], budget, seed, 1, held=held) is None:
        return run.outcome(False, "transport")
    return run.outcome(True, "done", extra=(JointPath(tuple(sweep)),))
