import numpy as np
import pytest

from graspmetric.grasping import (
    MAX_APERTURE,
    SIDE_BANDS,
    Grasp,
    generate_grasps,
    grasp_metric,
    side_grasp,
    top_grasp,
)
from graspmetric.transforms import RigidTransform, rot_z
from graspmetric.world import SqObject


def _line_distance(point, origin, direction):
    d = direction / np.linalg.norm(direction)
    v = point - origin
    return float(np.linalg.norm(v - (v @ d) * d))


def test_no_counts_no_grasps(can):
    assert generate_grasps(can, 0, 0) == []


def test_count_is_three_bands_plus_tops(can):
    grasps = generate_grasps(can, 8, 4)
    assert len(grasps) == 8 * 3 + 4
    assert [g.preshape for g in grasps].count("spherical") == 4


def test_negative_counts_rejected(can):
    with pytest.raises(ValueError):
        generate_grasps(can, -1, 2)


def test_wide_object_gets_nothing():
    assert generate_grasps(SqObject("tub", MAX_APERTURE + 0.01, 0.1), 8, 4) == []
    assert len(generate_grasps(SqObject("tub", MAX_APERTURE, 0.1), 8, 4)) == 28


def test_side_approach_lines_cross_the_axis(can):
    for g in generate_grasps(can, 12, 0):
        o_T_h = g.object_to_hand
        p = o_T_h.apply(g.approach_point)
        d = o_T_h.apply_vector(g.approach_dir)
        # closest distance between the approach line and the z axis
        n = np.cross(d, [0.0, 0.0, 1.0])
        assert abs(p @ n) / np.linalg.norm(n) < 1e-9
        assert abs(d[2]) < 1e-12
        # approach points inwards
        assert p[:2] @ d[:2] <= 0 or np.linalg.norm(p[:2]) < 1e-12


def test_top_approach_points_straight_down(can):
    for g in generate_grasps(can, 0, 5):
        d = g.object_to_hand.apply_vector(g.approach_dir)
        np.testing.assert_allclose(d, [0, 0, -1], atol=1e-12)


def test_metric_zero_when_line_hits_com(can):
    assert grasp_metric(can, side_grasp(can, 0.7, 0.5)) < 1e-12
    assert grasp_metric(can, top_grasp(can, 1.1)) < 1e-12


def test_metric_textbook_line_distance():
    ball = SqObject("ball", 0.05, 0.1, com=(0.0, 0.0, 0.0))
    # hand frame equal to the object frame, approach line through (0, 0.05, 0) along x
    g = Grasp(RigidTransform.identity(), approach_point=[0.0, 0.05, 0.0], approach_dir=[1.0, 0.0, 0.0])
    assert grasp_metric(ball, g) == pytest.approx(0.05, abs=1e-15)


def test_metric_matches_hand_computed_distances():
    cyl = SqObject("cyl", 0.04, 0.2)
    com = cyl.com_array
    for band in SIDE_BANDS:
        g = side_grasp(cyl, 0.4, band)
        o_T_h = g.object_to_hand
        expected = _line_distance(com, o_T_h.apply(g.approach_point), o_T_h.apply_vector(g.approach_dir))
        assert grasp_metric(cyl, g) == pytest.approx(expected, abs=1e-12)
        assert grasp_metric(cyl, g) == pytest.approx(abs(band - 0.5) * 0.2, abs=1e-12)
    assert grasp_metric(cyl, top_grasp(cyl, 0.0)) < grasp_metric(cyl, side_grasp(cyl, 0.0, 0.75))


def test_middle_band_is_strictly_best():
    cyl = SqObject("cyl", 0.04, 0.2)
    low, mid, high = (grasp_metric(cyl, side_grasp(cyl, 0.3, b)) for b in SIDE_BANDS)
    assert mid < low and mid < high


def test_metric_non_negative_with_offset_com(rng):
    obj = SqObject("lopsided", 0.05, 0.2, com=(0.02, -0.01, 0.07))
    for g in generate_grasps(obj, 9, 6):
        assert grasp_metric(obj, g) >= 0
    assert grasp_metric(obj, top_grasp(obj, 0.0)) == pytest.approx(np.hypot(0.02, 0.01), abs=1e-12)


def test_metric_ignores_where_the_object_is(can):
    g = side_grasp(can, 1.3, 0.75)
    before = grasp_metric(can, g)
    for pose in (RigidTransform.from_xyz_yaw(0.4, 0.2, 0.1, 2.0), RigidTransform(rot_z(-0.7), [1, 2, 3])):
        hand = g.hand_pose(pose)
        assert g.object_pose(hand).isclose(pose, atol=1e-12)
        assert grasp_metric(can, g) == before


def test_grasp_rejects_bad_direction():
    with pytest.raises(ValueError):
        Grasp(RigidTransform.identity(), approach_dir=[0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        Grasp(RigidTransform.identity(), approach_dir=[0.0, 0.0, 2.0])
