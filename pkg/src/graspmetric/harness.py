"""Randomized desk scenarios, paired evaluation of the ranking modes, CSV output.

Every trial is a pure function of ``(seed, object index, trial id)``.  One
candidate grasp set is built per trial and ranked under each requested mode,
so the modes are compared on identical scenes.  Executions are cached per
grasp: when two modes pick the same grasp they share one planning run.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .fixtures import Fixtures
from .grasping import Grasp, generate_grasps, grasp_metric
from .kinematics import DEFAULT_PHI_SAMPLES, ArmModel
from .metrics import RankedGraspSet, arm_metrics, average_ranking, goal_ranking, start_ranking
from .planner import DEFAULT_BUDGET, MODES, TaskOutcome, execute_task
from .tasks import (
    DEFAULT_CLEARANCE,
    DEFAULT_N_STEPS,
    DEFAULT_N_THETA,
    PickPlaceTask,
    PouringTask,
    goal_pose_guesses,
    pourer_goal_guesses,
    pouring_rim_guesses,
)
from .transforms import RigidTransform, rot_z
from .world import Box, Scene, SqObject, arm_in_collision, held_object_collision, object_pose_in_collision

CSV_HEADER = ("object", "mode", "trial", "success", "hand_disp_m", "plan_nodes", "plan_wall_s", "grasp_id", "group")
TASK_KINDS = ("pick_place", "pour")
MAX_ATTEMPTS = 100
WALL_THICKNESS = 0.01


class ScenarioInfeasible(RuntimeError):
    """No valid scenario found within the resampling budget."""


def default_table() -> Box:
    return Box.from_bounds([-0.3, -0.8, -0.05], [1.0, 0.8, 0.0], name="table")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a suite run depends on.

    ``objects`` holds :class:`SqObject` fixtures for pick-and-place and
    ``(pourer, receiver)`` pairs for pouring.  Regions are
    ``(xmin, xmax, ymin, ymax)`` rectangles on the table top.
    """

    seed: int = 0
    trials: int = 100
    task_kind: str = "pick_place"
    objects: tuple = ()
    modes: tuple = MODES
    start_region: tuple = (0.35, 0.65, -0.45, -0.15)
    goal_region: tuple = (0.35, 0.65, 0.15, 0.45)
    arm: ArmModel = field(default_factory=ArmModel)
    table: Box | None = field(default_factory=default_table)
    obstacles: tuple = ()
    side_count: int = 8
    top_count: int = 4
    n_steps: int = DEFAULT_N_STEPS
    n_theta: int = DEFAULT_N_THETA
    clearance: float = DEFAULT_CLEARANCE
    clutter_prob: float = 0.5
    bin_prob: float = 0.3
    platform_prob: float = 0.2
    phi_samples: int = DEFAULT_PHI_SAMPLES
    budget: int = DEFAULT_BUDGET
    rank: str = "best"
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"task_kind must be one of {TASK_KINDS}")
        if not self.objects:
            raise ValueError("at least one fixture object is required")
        for o in self.objects:
            ok = isinstance(o, SqObject) if self.task_kind == "pick_place" else (
                isinstance(o, tuple) and len(o) == 2 and all(isinstance(v, SqObject) for v in o)
            )
            if not ok:
                raise ValueError("objects must be SqObject (pick_place) or (pourer, receiver) pairs (pour)")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ValueError(f"modes must be a non-empty subset of {MODES}")
        if self.phi_samples < 1 or self.budget < 1:
            raise ValueError("phi_samples and budget must be >= 1")
        parse_rank(self.rank)
        top = self.table.top if self.table is not None else 0.0
        sh = self.arm.shoulder_point
        for region in (self.start_region, self.goal_region):
            x0, x1, y0, y1 = region
            if not (x0 < x1 and y0 < y1):
                raise ValueError("regions need min < max")
            corners = np.array([[x, y, top] for x in (x0, x1) for y in (y0, y1)])
            if np.any(np.linalg.norm(corners - sh, axis=1) > self.arm.reach):
                raise ValueError("sampling region reaches outside the arm's gross reach")

    @property
    def table_top(self) -> float:
        return self.table.top if self.table is not None else 0.0

    def object_label(self, index: int) -> str:
        o = self.objects[index]
        return o.name if isinstance(o, SqObject) else f"{o[0].name}+{o[1].name}"


def config_from_fixtures(fixtures: Fixtures, task_kind: str = "pick_place", **overrides) -> ScenarioConfig:
    """Suite configuration for ``task_kind`` built from a parsed fixture file.

    Pick-and-place uses every ``pick`` object; pouring uses the
    pourer/receiver pairs.  Keyword arguments override any field.
    """
    spec = fixtures.task(task_kind)
    objects = fixtures.objects_for("pick") if task_kind == "pick_place" else fixtures.pairs
    fields = dict(
        task_kind=task_kind,
        objects=tuple(objects),
        start_region=spec.start_region,
        goal_region=spec.goal_region,
        arm=fixtures.arm,
        table=fixtures.table,
        obstacles=fixtures.obstacles,
        side_count=spec.side_count,
        top_count=spec.top_count,
        n_steps=spec.n_steps,
        n_theta=spec.n_theta,
        clearance=spec.clearance,
        clutter_prob=spec.clutter_prob,
        bin_prob=spec.bin_prob,
        platform_prob=spec.platform_prob,
    )
    fields.update(overrides)
    return ScenarioConfig(**fields)


def parse_rank(rank: str):
    """``best`` | ``worst`` | ``index:<k>`` -> callable mapping a set size to a rank."""
    if rank == "best":
        return lambda n: 0
    if rank == "worst":
        return lambda n: n - 1
    if rank.startswith("index:"):
        try:
            k = int(rank.split(":", 1)[1])
        except ValueError:
            k = -1
        if k >= 0:
            return lambda n: k
    raise ValueError(f"rank must be best, worst or index:<k>, got {rank!r}")


# ------------------------------------------------------------------ scenarios


def _uniform_xy(rng, region):
    x0, x1, y0, y1 = region
    return rng.uniform(x0, x1), rng.uniform(y0, y1)


def _bin_walls(cx, cy, z0, inner, height, yaw, tag) -> list[Box]:
    R = rot_z(yaw)
    half_long = inner + WALL_THICKNESS
    walls = []
    for k, (ux, uy) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
        offset = R @ np.array([ux, uy, 0.0]) * (inner + WALL_THICKNESS / 2)
        half = [WALL_THICKNESS / 2, half_long, height / 2] if ux else [half_long, WALL_THICKNESS / 2, height / 2]
        center = np.array([cx, cy, z0 + height / 2]) + offset
        walls.append(Box(center, half, R, name=f"{tag}_wall{k}"))
    return walls


def _clutter(rng, anchor: np.ndarray, obj: SqObject, z: float, count: int) -> list:
    items = []
    for k in range(count):
        r = rng.uniform(0.03, 0.05)
        h = rng.uniform(0.08, 0.20)
        dist = obj.radius + r + rng.uniform(0.06, 0.14)
        ang = rng.uniform(-np.pi, np.pi)
        pose = RigidTransform.from_xyz_yaw(anchor[0] + dist * np.cos(ang), anchor[1] + dist * np.sin(ang), z)
        items.append((SqObject(f"clutter{k}", r, h), pose))
    return items


def _scene_ok(scene: Scene, placed: list) -> bool:
    """Every placed (object, pose) is free of boxes and of the objects before it, and the ready posture is free."""
    for k, (o, pose) in enumerate(placed):
        partial = Scene(scene.arm, scene.table, scene.obstacles, placed[:k])
        if held_object_collision(partial, o, pose.rotation, pose.translation)[0]:
            return False
    return not arm_in_collision(scene, scene.arm.ready_config)


def sample_scenario(config: ScenarioConfig, trial_id: int, object_index: int = 0):
    """Deterministic ``(Scene, task)`` for ``(config.seed, object_index, trial_id)``.

    The start pose is drawn once per trial (uniform position in the start
    region, uniform yaw, upright on the table); the goal side and the
    clutter are resampled until the scene is collision-free.
    """
    rng = np.random.default_rng([int(config.seed), int(object_index), int(trial_id)])
    z = config.table_top
    item = config.objects[object_index]
    sx, sy = _uniform_xy(rng, config.start_region)
    start = RigidTransform.from_xyz_yaw(sx, sy, z, rng.uniform(-np.pi, np.pi))
    base = Scene(config.arm, config.table, config.obstacles)
    for _ in range(MAX_ATTEMPTS):
        clutter = _clutter(rng, start.translation, item if isinstance(item, SqObject) else item[0], z,
                           int(rng.integers(1, 3)) if rng.random() < config.clutter_prob else 0)
        gx, gy = _uniform_xy(rng, config.goal_region)
        if config.task_kind == "pick_place":
            obj = item
            extra, gz = [], z
            kind = rng.random()
            if kind < config.bin_prob:
                inner = obj.radius + rng.uniform(0.02, 0.05)
                extra = _bin_walls(gx, gy, z, inner, rng.uniform(0.5, 0.9) * obj.height, rng.uniform(-np.pi, np.pi), "bin")
            elif kind < config.bin_prob + config.platform_prob:
                top = z + rng.uniform(0.05, 0.15)
                half = obj.radius + rng.uniform(0.03, 0.08)
                extra = [Box([gx, gy, (z + top) / 2], [half, half, (top - z) / 2], name="platform")]
                gz = top
            scene = Scene(config.arm, config.table, config.obstacles + tuple(extra))
            placed = [(obj, start)] + clutter
            goal_check = RigidTransform(start.rotation, [gx, gy, gz])
            scene = Scene(scene.arm, scene.table, scene.obstacles, placed)
            if not _scene_ok(scene, placed):
                continue
            if object_pose_in_collision(scene, obj, goal_check):
                continue
            return scene, PickPlaceTask(obj, start, [gx, gy, gz])
        pourer, receiver = item
        receiver_pose = RigidTransform.from_xyz_yaw(gx, gy, z)
        placed = [(pourer, start), (receiver, receiver_pose)] + clutter
        scene = Scene(base.arm, base.table, base.obstacles, placed)
        if not _scene_ok(scene, placed):
            continue
        return scene, PouringTask(pourer, start, receiver, receiver_pose)
    raise ScenarioInfeasible(f"no valid scenario for trial {trial_id} after {MAX_ATTEMPTS} attempts")


# ------------------------------------------------------------------ trials


@dataclass(frozen=True)
class TrialPlan:
    """Candidate grasps of one trial and their ranking under each mode."""

    grasp_ids: tuple
    m_g: tuple
    m_a_start: tuple
    m_a_goal: tuple
    goal_guesses: tuple
    rankings: dict


def prepare_trial(config: ScenarioConfig, scene: Scene, task) -> TrialPlan:
    """Grasps feasible at the start, their goal guesses and the per-mode rankings."""
    obj = task.obj if isinstance(task, PickPlaceTask) else task.pourer
    start_pose = task.start_pose if isinstance(task, PickPlaceTask) else task.pourer_start
    top_count = config.top_count if isinstance(task, PickPlaceTask) else 0
    grasps = generate_grasps(obj, config.side_count, top_count)
    m_s_all = arm_metrics(scene, obj, grasps, start_pose, config.phi_samples)
    ids = [i for i in range(len(grasps)) if m_s_all[i] > 0]
    cand = [grasps[i] for i in ids]
    m_g = [grasp_metric(obj, g) for g in cand]
    m_s = [int(m_s_all[i]) for i in ids]
    if isinstance(task, PickPlaceTask):
        guesses = goal_pose_guesses(scene, task, cand, config.n_steps, config.phi_samples)
    else:
        retained = pouring_rim_guesses(scene, task, config.n_theta, config.clearance, config.phi_samples)
        hands = [h for _, _, h in retained]
        counts = _hand_pose_counts(scene, task, hands, config.phi_samples)
        guesses = pourer_goal_guesses(scene, task, cand, hands, counts)
    moved = scene.without_object(obj.name)
    m_t = [int(v) for v in arm_metrics(moved, obj, cand, list(guesses), config.phi_samples)]
    rankings = {}
    for mode in config.modes:
        if not cand:
            rankings[mode] = RankedGraspSet()
        elif mode == "start":
            rankings[mode] = start_ranking(cand, m_s, m_g, guesses, ids)
        elif mode == "goal":
            rankings[mode] = goal_ranking(cand, m_t, m_g, guesses, ids)
        else:
            rankings[mode] = average_ranking(cand, m_s, m_t, m_g, guesses, ids)
    return TrialPlan(tuple(ids), tuple(m_g), tuple(m_s), tuple(m_t), tuple(guesses), rankings)


def _hand_pose_counts(scene, task: PouringTask, hands, phi_samples):
    ident = Grasp(RigidTransform.identity())
    moved = scene.without_object(task.pourer.name)
    return [int(v) for v in arm_metrics(moved, task.pourer, [ident] * len(hands), hands, phi_samples)]


@dataclass(frozen=True)
class ResultRow:
    object: str
    mode: str
    trial: int
    success: bool
    hand_disp_m: float
    plan_nodes: int
    plan_wall_s: float
    grasp_id: int
    group: str
    stage: str = ""


def run_trial(config: ScenarioConfig, object_index: int, trial_id: int) -> list[ResultRow]:
    """All requested modes for one trial; errors become failure rows."""
    label = config.object_label(object_index)
    pick = parse_rank(config.rank)

    def fail(mode, stage, grasp_id=-1, group=""):
        return ResultRow(label, mode, trial_id, False, float("nan"), 0, 0.0, grasp_id, group, stage)

    try:
        scene, task = sample_scenario(config, trial_id, object_index)
        plan = prepare_trial(config, scene, task)
    except Exception as exc:  # per-trial failures never abort a suite
        return [fail(m, f"error:{type(exc).__name__}") for m in config.modes]

    cache: dict[int, TaskOutcome] = {}
    rows = []
    for mode in config.modes:
        ranked = plan.rankings[mode]
        if len(ranked) == 0:
            rows.append(fail(mode, "no-grasp"))
            continue
        k = pick(len(ranked))
        if k >= len(ranked):
            rows.append(fail(mode, "rank"))
            continue
        entry = ranked[k]
        # a grasp carries the same goal guess in every mode, so its outcome is shared
        key = entry.index
        if key not in cache:
            seed = (int(config.seed), int(object_index), int(trial_id), int(entry.index))
            try:
                cache[key] = execute_task(scene, task, ranked, mode, k, config.budget, seed, config.phi_samples)
            except Exception as exc:
                rows.append(fail(mode, f"error:{type(exc).__name__}", entry.index, entry.group))
                continue
        out = cache[key]
        rows.append(
            ResultRow(label, mode, trial_id, out.success, out.hand_displacement if out.success else float("nan"),
                      out.nodes, out.wall_s, entry.index, entry.group, out.stage)
        )
    return rows


def _run_job(args):
    config, object_index, trial_id = args
    return run_trial(config, object_index, trial_id)


def run_suite(config: ScenarioConfig, progress=None) -> tuple[list[ResultRow], list[dict]]:
    """Rows for every (object, trial, mode) in canonical order, plus the summary."""
    jobs = [(config, oi, t) for oi in range(len(config.objects)) for t in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=4))
    else:
        results = []
        for job in jobs:
            results.append(_run_job(job))
            if progress is not None:
                progress(len(results), len(jobs))
    rows = [r for batch in results for r in batch]
    return rows, summarize(rows)


def best_worst_sweep(config: ScenarioConfig, mode: str = "average"):
    """Rows for the best- and the worst-ranked grasp under ``mode`` on identical trials."""
    best, _ = run_suite(replace(config, modes=(mode,), rank="best"))
    worst, _ = run_suite(replace(config, modes=(mode,), rank="worst"))
    return best, worst


# ------------------------------------------------------------------ output


def summarize(rows) -> list[dict]:
    """Per (object, mode): success rate, mean displacement over successes, mean effort."""
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r.object, r.mode), []).append(r)
    out = []
    for (obj, mode), rs in groups.items():
        ok = [r for r in rs if r.success]
        out.append(
            {
                "object": obj,
                "mode": mode,
                "trials": len(rs),
                "successes": len(ok),
                "success_rate": len(ok) / len(rs),
                "mean_disp_m": float(np.mean([r.hand_disp_m for r in ok])) if ok else float("nan"),
                "mean_nodes": float(np.mean([r.plan_nodes for r in rs])),
                "mean_wall_s": float(np.mean([r.plan_wall_s for r in rs])),
            }
        )
    return out


def _fmt(v: float, digits: int) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{digits}f}"


def rows_to_csv(rows, include_wall: bool = True) -> str:
    """CSV text with the fixed header; ``include_wall=False`` blanks the wall-time column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(
            [r.object, r.mode, r.trial, int(r.success), _fmt(r.hand_disp_m, 6), r.plan_nodes,
             _fmt(r.plan_wall_s, 4) if include_wall else "", r.grasp_id, r.group]
        )
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
