import math

import numpy as np
import pytest
from oracles import average_order_exact, count_free_ik, exact_group_names

from graspmetric.grasping import generate_grasps, grasp_metric
from graspmetric.metrics import (
    arm_metric,
    arm_metrics,
    average_ranking,
    classify,
    feature_scale,
    goal_ranking,
    rank_average,
    rank_m_ag,
    start_ranking,
)
from graspmetric.tasks import PickPlaceTask, goal_pose_guesses
from graspmetric.transforms import RigidTransform
from graspmetric.world import Box

PHI = 32


def test_single_grasp_is_fair(can):
    g = generate_grasps(can, 1, 0)[0]
    ranked = rank_m_ag([(g, 17, 0.01)])
    assert len(ranked) == 1 and ranked.best.group == "fair"
    assert ranked.stats == (17.0, 0.0)


def test_three_way_split(can):
    gs = generate_grasps(can, 3, 0)[:3]
    ranked = rank_m_ag([(gs[0], 0, 0.02), (gs[1], 10, 0.02), (gs[2], 20, 0.02)])
    assert [e.group for e in ranked.entries] == ["bad", "fair", "very_good"]
    mu, sigma = ranked.stats
    assert mu == 10 and sigma == pytest.approx(math.sqrt(200 / 3), abs=1e-12)
    assert list(ranked.order) == [2, 1, 0]


def test_equal_arm_metric_sorts_by_grasp_metric(can):
    gs = generate_grasps(can, 3, 0)[:3]
    ranked = rank_m_ag([(gs[0], 5, 0.03), (gs[1], 5, 0.01), (gs[2], 5, 0.02)])
    assert list(ranked.order) == [1, 2, 0]
    assert ranked.best.grasp is gs[1] and ranked.worst.grasp is gs[0]


def test_grasp_metric_ties_keep_input_order(can):
    gs = generate_grasps(can, 4, 0)[:4]
    ranked = rank_m_ag([(g, 3, 0.01) for g in gs])
    assert list(ranked.order) == [0, 1, 2, 3]


def test_empty_rank_rejected():
    with pytest.raises(ValueError):
        rank_m_ag([])


def test_groups_match_exact_arithmetic(rng):
    for _ in range(200):
        m = rng.integers(0, 40, rng.integers(1, 30))
        assert classify(m)[0] == exact_group_names([int(v) for v in m])


def test_group_boundaries_close_downwards():
    # mean 2, sigma 1: 3 sits exactly on mu + sigma and 1 exactly on mu - sigma
    groups, mu, sigma = classify([1, 3])
    assert (mu, sigma) == (2.0, 1.0)
    assert groups == ["bad", "good"]
    groups, _, _ = classify([1, 2, 3])
    assert groups == ["bad", "fair", "very_good"]


def test_feature_scale_examples():
    np.testing.assert_allclose(feature_scale([2, 4, 10]), [0, 0.25, 1])
    np.testing.assert_array_equal(feature_scale([7, 7, 7]), [0, 0, 0])
    assert feature_scale([]).size == 0


def test_wall_lowers_arm_metric(desk, wall, can):
    pose = desk.object_pose("can")
    grasps = generate_grasps(can, 8, 4)
    open_m = arm_metrics(desk, can, grasps, pose, PHI)
    walled = arm_metrics(desk.with_obstacle(wall), can, grasps, pose, PHI)
    assert np.all(walled <= open_m)
    assert walled.sum() < open_m.sum()


def test_unreachable_pose_has_zero_metric(desk, can):
    g = generate_grasps(can, 1, 0)[0]
    assert arm_metric(desk, RigidTransform.from_xyz_yaw(2.0, 0.0, 0.0), can, g, PHI) == 0


def test_arm_metric_matches_per_phi_oracle(desk, can):
    pose = desk.object_pose("can")
    for g in generate_grasps(can, 4, 2)[::2]:
        expected = count_free_ik(desk, g.hand_pose(pose), PHI, ignore=("can",))
        assert arm_metric(desk, pose, can, g, PHI) == expected


def test_side_grasp_beats_top_grasp_under_a_shelf(desk, can):
    # a low shelf over the can leaves no room for the wrist to come from above
    shelf = Box([0.5, -0.2, 0.22], [0.15, 0.15, 0.01], name="shelf")
    scene = desk.with_obstacle(shelf)
    pose = scene.object_pose("can")
    grasps = generate_grasps(can, 8, 4)
    m = arm_metrics(scene, can, grasps, pose, 64)
    side, top = m[:24], m[24:]
    assert side.max() > top.max()
    assert arm_metrics(desk, can, grasps, pose, 64)[24:].max() > 0


def test_average_keeps_grasps_without_goal(can):
    gs = generate_grasps(can, 4, 0)[:4]
    guess = RigidTransform.identity()
    ranked = average_ranking(gs, [10, 20, 30, 40], [99, 5, 5, 10], [0.01] * 4, [None, guess, guess, guess])
    assert len(ranked) == 4
    # the first grasp's goal count is ignored: scaled goal vector is [0, 0.5, 0.5, 1]
    np.testing.assert_allclose([e.m_a for e in ranked.entries], [0, 1 / 3 + 0.5, 2 / 3 + 0.5, 2])
    assert ranked.best.index == 3


def test_goal_ranking_drops_grasps_without_guess(can):
    gs = generate_grasps(can, 3, 0)[:3]
    guess = RigidTransform.identity()
    ranked = goal_ranking(gs, [1, 2, 3], [0.0] * 3, [None, guess, guess])
    assert sorted(e.index for e in ranked.entries) == [1, 2]
    assert len(goal_ranking(gs, [1, 2, 3], [0.0] * 3, [None] * 3)) == 0


def test_start_ranking_ids_label_entries(can):
    gs = generate_grasps(can, 3, 0)[:3]
    ranked = start_ranking(gs, [3, 2, 1], [0.0] * 3, ids=[7, 8, 9])
    assert [e.index for e in ranked.ranked()] == [7, 8, 9]


def test_rank_average_matches_exact_oracle_on_fixture(desk, can):
    start = desk.object_pose("can")
    task = PickPlaceTask(can, start, np.array([0.45, 0.3, 0.0]))
    grasps = generate_grasps(can, 8, 4)
    guesses = goal_pose_guesses(desk, task, grasps, 8, PHI)
    ranked = rank_average(desk, can, grasps, start, guesses, PHI)
    goal_scene = desk.without_object("can")
    m_s = [count_free_ik(desk, g.hand_pose(start), PHI, ignore=("can",)) for g in grasps]
    m_t = [0 if p is None else count_free_ik(goal_scene, g.hand_pose(p), PHI) for g, p in zip(grasps, guesses)]
    m_g = [grasp_metric(can, g) for g in grasps]
    assert [e.index for e in ranked.ranked()] == average_order_exact(m_s, m_t, m_g, guesses)


def test_rank_average_requires_aligned_guesses(desk, can):
    grasps = generate_grasps(can, 2, 0)
    with pytest.raises(ValueError):
        rank_average(desk, can, grasps, desk.object_pose("can"), [None], PHI)
