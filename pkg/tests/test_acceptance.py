"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict with the measured numbers
(echoed in the terminal summary) before asserting, so a failing criterion
still reports what was observed.  Suites use seed 7 and a planner budget of
5000 nodes per query.
"""

import csv
import io
import math
import subprocess
import sys
import time

import numpy as np
import test_properties as props
from oracles import rotation_step_scan, average_order_exact, rim_angle_scan, count_free_ik, numerical_ik

from graspmetric.fixtures import load_fixtures
from graspmetric.grasping import generate_grasps, grasp_metric
from graspmetric.harness import (
    best_worst_sweep,
    config_from_fixtures,
    prepare_trial,
    run_suite,
    sample_scenario,
)
from graspmetric.kinematics import ArmModel, analytic_ik, fk_batch, forward_kinematics, ik_batch, phi_grid
from graspmetric.tasks import goal_pose_indices, pouring_rim_guesses
from graspmetric.transforms import rotation_angle

SEED = 7
TRIALS = 100
BUDGET = 5000
TIME_LIMIT = 600.0


def _verdict(report, number, title, ok, detail):
    report.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}")
    return ok


def _by_object(summary):
    return {(s["object"], s["mode"]): s for s in summary}


def _pct(s):
    return 100.0 * s["success_rate"]


# ------------------------------------------------------------------ 1


def test_criterion_1_ik_correctness(report):
    t0 = time.perf_counter()
    arm = ArmModel()
    rng = np.random.default_rng(SEED)
    Q = rng.uniform(arm.lower, arm.upper, (1000, 7))
    R, p = fk_batch(arm, Q)
    q, valid, _ = ik_batch(arm, R, p, phi_grid(8))
    owner = np.nonzero(valid)[0]
    R2, p2 = fk_batch(arm, q[valid])
    pos_err = float(np.max(np.linalg.norm(p2 - p[owner], axis=1)))
    rot_err = float(max(rotation_angle(a.T @ b) for a, b in zip(R2, R[owner])))

    targets = []
    while len(targets) < 10:
        qt = rng.uniform(arm.lower, arm.upper)
        qt[[1, 3, 5]] = np.sign(qt[[1, 3, 5]]) * np.clip(np.abs(qt[[1, 3, 5]]), 0.3, 2.6)
        T = forward_kinematics(arm, qt)
        if not any(analytic_ik(arm, T, phi).degenerate for phi in phi_grid(8)):
            targets.append(T)
    phis = [-math.pi, -1.7, -0.4, 0.9, 2.2]
    mismatches = 0
    for T in targets:
        oracle = numerical_ik(arm, T, phis, seeds_per_branch=8)
        for phi, found in zip(phis, oracle):
            mismatches += len(analytic_ik(arm, T, phi)) != len(found)
    elapsed = time.perf_counter() - t0
    ok = pos_err < 1e-6 and rot_err < 1e-6 and mismatches == 0 and elapsed < 30
    detail = (f"{len(owner)} solutions from 1000 configs, max error {pos_err:.1e} m / {rot_err:.1e} rad "
              f"(tol 1e-6); count mismatches vs numerical IK on 10 poses x 5 elbow angles: {mismatches}; "
              f"{elapsed:.1f} s (limit 30 s)")
    assert _verdict(report, 1, "IK correctness", ok, detail)


# ------------------------------------------------------------------ 2


def test_criterion_2_metric_invariants(report):
    props.CASES.clear()
    t0 = time.perf_counter()
    failures = []
    for fn in (
        props.test_grasp_metric_survives_rigid_motion,
        props.test_ranking_ignores_positive_affine_rescaling,
        props.test_average_of_identical_poses_equals_single_pose,
        props.test_scene_average_of_identical_poses_equals_single_pose,
        props.test_obstacle_never_raises_arm_metric,
    ):
        try:
            fn()
        except Exception as exc:  # record and keep going so every property is exercised
            failures.append(f"{fn.__name__}: {type(exc).__name__}")
    elapsed = time.perf_counter() - t0
    total = sum(props.CASES.values())
    ok = not failures and total >= 1000 and elapsed < 120
    parts = ", ".join(f"{k} {v}" for k, v in sorted(props.CASES.items()))
    detail = f"{total} cases ({parts}); failures: {failures or 'none'}; {elapsed:.1f} s (limit 120 s)"
    assert _verdict(report, 2, "metric invariants", ok, detail)


# ------------------------------------------------------------------ 3


def test_criterion_3_pick_place_modes(report):
    config = config_from_fixtures(load_fixtures(), "pick_place", seed=SEED, trials=TRIALS, budget=BUDGET)
    t0 = time.perf_counter()
    _, summary = run_suite(config)
    elapsed = time.perf_counter() - t0
    table = _by_object(summary)
    ok = len(config.objects) >= 3 and elapsed < TIME_LIMIT
    parts = []
    for obj in config.objects:
        s, g, a = (_pct(table[(obj.name, m)]) for m in ("start", "goal", "average"))
        good = a >= s + 5 and abs(g - a) <= 5
        ok &= good
        parts.append(f"{obj.name} start {s:.0f}% goal {g:.0f}% average {a:.0f}%{'' if good else ' (miss)'}")
    detail = "; ".join(parts) + f"; {elapsed:.0f} s (limit 600 s)"
    assert _verdict(report, 3, "pick-and-place: average >= start + 5 pts, |goal - average| <= 5 pts", ok, detail)


# ------------------------------------------------------------------ 4


def test_criterion_4_best_vs_worst(report):
    config = config_from_fixtures(load_fixtures(), "pick_place", seed=SEED, trials=TRIALS, budget=BUDGET)
    t0 = time.perf_counter()
    best, worst = best_worst_sweep(config, "average")
    elapsed = time.perf_counter() - t0
    ok = elapsed < TIME_LIMIT
    parts = []
    for obj in config.objects:
        b = [r for r in best if r.object == obj.name]
        w = [r for r in worst if r.object == obj.name]
        sb = 100.0 * sum(r.success for r in b) / len(b)
        sw = 100.0 * sum(r.success for r in w) / len(w)
        db = np.mean([r.hand_disp_m for r in b if r.success]) if any(r.success for r in b) else math.nan
        dw = np.mean([r.hand_disp_m for r in w if r.success]) if any(r.success for r in w) else math.nan
        good = sb >= sw + 20 and db < dw
        ok &= bool(good)
        parts.append(f"{obj.name} best {sb:.0f}% {db:.3f} m vs worst {sw:.0f}% {dw:.3f} m{'' if good else ' (miss)'}")
    detail = "; ".join(parts) + f"; {elapsed:.0f} s (limit 600 s)"
    assert _verdict(report, 4, "best beats worst by >= 20 pts with lower displacement", ok, detail)


# ------------------------------------------------------------------ 5


def test_criterion_5_pouring_modes(report):
    config = config_from_fixtures(load_fixtures(), "pour", seed=SEED, trials=TRIALS, budget=BUDGET)
    t0 = time.perf_counter()
    _, summary = run_suite(config)
    elapsed = time.perf_counter() - t0
    table = _by_object(summary)
    ok = len(config.objects) >= 3 and elapsed < TIME_LIMIT
    parts = []
    for i in range(len(config.objects)):
        label = config.object_label(i)
        st, gl, av = (table[(label, m)] for m in ("start", "goal", "average"))
        order = _pct(st) >= _pct(av) >= _pct(gl)
        disp = st["mean_disp_m"] <= min(av["mean_disp_m"], gl["mean_disp_m"])
        ok &= order and disp
        parts.append(
            f"{label} start {_pct(st):.0f}% {st['mean_disp_m']:.3f} m, average {_pct(av):.0f}% "
            f"{av['mean_disp_m']:.3f} m, goal {_pct(gl):.0f}% {gl['mean_disp_m']:.3f} m"
            + ("" if order and disp else " (miss)")
        )
    detail = "; ".join(parts) + f"; {elapsed:.0f} s (limit 600 s)"
    assert _verdict(report, 5, "pouring: start >= average >= goal, start displacement smallest", ok, detail)


# ------------------------------------------------------------------ 6


def _rotation_step_agreement(instances=50, phi=16):
    config = config_from_fixtures(load_fixtures(), "pick_place", seed=2024)
    same = 0
    for k in range(instances):
        scene, task = sample_scenario(config, k, k % len(config.objects))
        grasps = generate_grasps(task.obj, 4, 2)
        got = goal_pose_indices(scene, task, grasps, 8, phi)
        same += got == rotation_step_scan(scene, task.obj, task.start_pose, task.goal_position, grasps, 8, phi)
    return same


def _average_order_agreement(instances=50, phi=16):
    config = config_from_fixtures(load_fixtures(), "pick_place", seed=4048, side_count=4, top_count=2,
                                  phi_samples=phi, modes=("average",))
    same = 0
    for k in range(instances):
        scene, task = sample_scenario(config, k, k % len(config.objects))
        plan = prepare_trial(config, scene, task)
        grasps = generate_grasps(task.obj, 4, 2)
        m_s = [count_free_ik(scene, g.hand_pose(task.start_pose), phi, ignore=(task.obj.name,)) for g in grasps]
        ids = [i for i, v in enumerate(m_s) if v > 0]
        goal_scene = scene.without_object(task.obj.name)
        guesses = list(plan.goal_guesses)
        m_t = [0 if p is None else count_free_ik(goal_scene, grasps[i].hand_pose(p), phi)
               for i, p in zip(ids, guesses)]
        m_g = [grasp_metric(task.obj, grasps[i]) for i in ids]
        expected = [ids[j] for j in average_order_exact([m_s[i] for i in ids], m_t, m_g, guesses)] if ids else []
        got = [e.index for e in plan.rankings["average"].ranked()]
        same += tuple(ids) == plan.grasp_ids and got == expected
    return same


def _rim_angle_agreement(instances=50, phi=16):
    config = config_from_fixtures(load_fixtures(), "pour", seed=2024)
    same = 0
    for k in range(instances):
        scene, task = sample_scenario(config, k, k % len(config.objects))
        got = [i for i, _, _ in pouring_rim_guesses(scene, task, 16, 0.05, phi)]
        same += got == rim_angle_scan(scene, task.pourer, task.receiver, task.receiver_pose, 16, 0.05, phi)
    return same


def test_criterion_6_algorithm_oracles(report):
    t0 = time.perf_counter()
    a1, a2, a3 = _rotation_step_agreement(), _average_order_agreement(), _rim_angle_agreement()
    elapsed = time.perf_counter() - t0
    ok = a1 == a2 == a3 == 50
    detail = (f"goal rotation steps {a1}/50, average orderings {a2}/50, retained rim angles {a3}/50 "
              f"exact matches; {elapsed:.0f} s")
    assert _verdict(report, 6, "algorithm oracles", ok, detail)


# ------------------------------------------------------------------ 7


def _without_wall(text):
    rows = list(csv.reader(io.StringIO(text)))
    k = rows[0].index("plan_wall_s")
    return [r[:k] + r[k + 1:] for r in rows]


def test_criterion_7_determinism(report, tmp_path):
    cmd = [sys.executable, "-m", "graspmetric", "--seed", str(SEED), "--trials", "10", "--budget", str(BUDGET),
           "--objects", "coffee_can,cleanser", "--quiet"]
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        proc = subprocess.run(cmd + ["--out", str(out)], capture_output=True, text=True, timeout=600)
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_text(encoding="utf-8"))
    a, b = (_without_wall(t) for t in outputs)
    ok = a == b and len(a) == 1 + 2 * 10 * 3
    detail = f"{len(a) - 1} rows per run, identical without the wall-time column: {a == b}"
    assert _verdict(report, 7, "determinism", ok, detail)
