"""Randomized invariants of the two metrics and of the rankings built on them.

``CASES`` counts every generated example so the acceptance run can report
how many cases the suite exercised.
"""

from collections import Counter

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from graspmetric.grasping import generate_grasps, grasp_metric
from graspmetric.kinematics import ArmModel
from graspmetric.metrics import arm_metrics, average_ranking, rank_average, rank_m_ag
from graspmetric.transforms import RigidTransform, rot_z
from graspmetric.world import Box, Scene, SqObject

CASES = Counter()

TABLE = Box.from_bounds([-0.3, -0.8, -0.05], [1.0, 0.8, 0.0], name="table")
ARM = ArmModel()

angles = st.floats(-np.pi, np.pi, allow_nan=False)
unit = st.floats(0.0, 1.0)


def _rotation(a, b, c):
    ca, sa = np.cos(b), np.sin(b)
    tilt = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    return rot_z(a) @ tilt @ rot_z(c)


objects = st.builds(
    lambda r, h, shape, cx, cy, cz: SqObject("thing", r, h, (cx * r / 2, cy * r / 2, cz * h), shape),
    st.floats(0.02, 0.09), st.floats(0.05, 0.3), st.sampled_from(["cylinder", "box", "cone"]),
    st.floats(-1, 1), st.floats(-1, 1), unit,
)
arm_values = st.lists(st.integers(0, 300), min_size=1, max_size=40)


@settings(max_examples=300)
@given(objects, st.integers(1, 9), st.integers(0, 6), angles, angles, angles,
       st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)))
def test_grasp_metric_survives_rigid_motion(obj, sides, tops, a, b, c, shift):
    CASES["grasp_metric_rigid"] += 1
    pose = RigidTransform(_rotation(a, b, c), shift)
    com_world = pose.apply(obj.com_array)
    for g in generate_grasps(obj, sides, tops):
        hand = g.hand_pose(pose)
        p, d = hand.apply(g.approach_point), hand.apply_vector(g.approach_dir)
        world = np.linalg.norm(np.cross(com_world - p, d))
        assert abs(world - grasp_metric(obj, g)) < 1e-12
        assert grasp_metric(obj, g) >= 0


@settings(max_examples=300)
@given(arm_values, st.floats(1e-3, 1e3), st.floats(-1e3, 1e3), st.data())
def test_ranking_ignores_positive_affine_rescaling(m_a, scale, offset, data):
    CASES["affine_rescaling"] += 1
    m_g = data.draw(st.lists(st.sampled_from([0.0, 0.01, 0.02, 0.05]), min_size=len(m_a), max_size=len(m_a)))
    base = rank_m_ag([(None, v, g) for v, g in zip(m_a, m_g)])
    moved = rank_m_ag([(None, scale * v + offset, g) for v, g in zip(m_a, m_g)])
    assert moved.order == base.order
    assert [e.group for e in moved.entries] == [e.group for e in base.entries]
    assert sorted(base.order) == list(range(len(m_a)))


@settings(max_examples=300)
@given(arm_values, st.data())
def test_average_of_identical_poses_equals_single_pose(m_a, data):
    CASES["average_equals_start"] += 1
    m_g = data.draw(st.lists(st.floats(0, 0.1), min_size=len(m_a), max_size=len(m_a)))
    same = RigidTransform.identity()
    avg = average_ranking([None] * len(m_a), m_a, m_a, m_g, [same] * len(m_a))
    single = rank_m_ag([(None, v, g) for v, g in zip(m_a, m_g)])
    assert avg.order == single.order


@settings(max_examples=50)
@given(st.floats(0.35, 0.65), st.floats(-0.45, 0.45), angles)
def test_scene_average_of_identical_poses_equals_single_pose(x, y, yaw):
    CASES["average_equals_start"] += 1
    can = SqObject("can", 0.04, 0.12)
    pose = RigidTransform.from_xyz_yaw(x, y, 0.0, yaw)
    scene = Scene(ARM, TABLE, (), ((can, pose),))
    grasps = generate_grasps(can, 4, 2)
    avg = rank_average(scene, can, grasps, pose, [pose] * len(grasps), 16)
    m_a = arm_metrics(scene, can, grasps, pose, 16)
    single = rank_m_ag([(g, v, grasp_metric(can, g)) for g, v in zip(grasps, m_a)])
    assert avg.order == single.order


@settings(max_examples=300)
@given(st.floats(0.35, 0.65), st.floats(-0.45, 0.45), angles,
       st.tuples(st.floats(0.1, 0.8), st.floats(-0.6, 0.6), st.floats(0.0, 0.6)),
       st.tuples(st.floats(0.01, 0.2), st.floats(0.01, 0.2), st.floats(0.01, 0.2)), angles)
def test_obstacle_never_raises_arm_metric(x, y, yaw, center, half, box_yaw):
    CASES["obstacle_monotone"] += 1
    can = SqObject("can", 0.04, 0.12)
    pose = RigidTransform.from_xyz_yaw(x, y, 0.0, yaw)
    scene = Scene(ARM, TABLE, (), ((can, pose),))
    grasps = generate_grasps(can, 4, 2)[::2]
    before = arm_metrics(scene, can, grasps, pose, 16)
    after = arm_metrics(scene.with_obstacle(Box(center, half, rot_z(box_yaw), "extra")), can, grasps, pose, 16)
    assert np.all(after <= before)
