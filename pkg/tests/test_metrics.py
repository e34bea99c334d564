import numpy as np
import pytest

from ellipose.errors import BehindCamera, EmptyPointSet
from ellipose.metrics import (PoseError, accuracy_curve, add_error,
                              point_set_diameter, pose_error,
                              reprojection_error, valid_pose)
from ellipose.quadric import CameraIntrinsics, Pose
from ellipose.rotations import axis_angle, matrix_to_quat, random_rotation

K = CameraIntrinsics(450.0, 450.0, 320.0, 240.0)


def random_pose(rng):
    return Pose(random_rotation(rng), rng.uniform(-1, 1, 3))


def test_pose_error_identity():
    rng = np.random.default_rng(0)
    p = random_pose(rng)
    e = pose_error(p, p)
    assert e.position == 0.0
    assert e.orientation < 1e-6


def test_pose_error_quarter_turn():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_pose(rng)
        axis = rng.normal(size=3)
        q = Pose(p.rotation @ axis_angle(axis, np.pi / 2), p.translation)
        assert abs(pose_error(q, p).orientation - 90.0) < 1e-9


def quat_angle_deg(Ra, Rb):
    qa, qb = matrix_to_quat(Ra), matrix_to_quat(Rb)
    return np.degrees(2.0 * np.arccos(np.clip(abs(float(qa @ qb)), 0.0, 1.0)))


def test_pose_error_matches_quaternion_distance():
    rng = np.random.default_rng(2)
    for _ in range(300):
        a, b = random_pose(rng), random_pose(rng)
        e = pose_error(a, b)
        assert abs(e.orientation - quat_angle_deg(a.rotation, b.rotation)) < 1e-6
        assert e.orientation == pose_error(b, a).orientation


def test_position_error_is_camera_center_distance():
    rng = np.random.default_rng(3)
    a, b = random_pose(rng), random_pose(rng)
    expected = np.linalg.norm(a.camera_center - b.camera_center)
    assert abs(pose_error(a, b).position - expected) < 1e-12


def test_position_triangle_inequality():
    rng = np.random.default_rng(4)
    for _ in range(100):
        a, b, c = (random_pose(rng) for _ in range(3))
        ab = pose_error(a, b).position
        bc = pose_error(b, c).position
        ac = pose_error(a, c).position
        assert ac <= ab + bc + 1e-12


def test_valid_pose_thresholds():
    assert valid_pose(PoseError(0.19, 19.0))
    assert not valid_pose(PoseError(0.21, 1.0))
    assert not valid_pose(PoseError(0.01, 21.0))
    assert valid_pose(PoseError(0.0, 0.0))


def test_reprojection_and_add_trivial():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.2, 0.2, (50, 3)) + [0, 0, 3.0]
    p = Pose(np.eye(3), np.zeros(3))
    assert reprojection_error(pts, p, p, K) == 0.0
    assert add_error(pts, p, p) == 0.0
    shifted = Pose(np.eye(3), np.array([0.3, -0.1, 0.2]))
    assert abs(add_error(pts, shifted, p) - np.linalg.norm([0.3, -0.1, 0.2])) < 1e-12


def test_add_matches_per_point_oracle():
    rng = np.random.default_rng(6)
    for _ in range(50):
        pts = rng.uniform(-1, 1, (20, 3))
        a, b = random_pose(rng), random_pose(rng)
        direct = np.mean([np.linalg.norm((a.rotation @ p + a.translation)
                                         - (b.rotation @ p + b.translation))
                          for p in pts])
        assert abs(add_error(pts, a, b) - direct) < 1e-12


def test_add_rigid_invariance():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, (30, 3))
    a, b = random_pose(rng), random_pose(rng)
    M = random_pose(rng)
    pts_m = pts @ M.rotation.T + M.translation
    a_m = a.compose(M.inverse())
    b_m = b.compose(M.inverse())
    assert abs(add_error(pts, a, b) - add_error(pts_m, a_m, b_m)) < 1e-9


def test_reprojection_behind_camera_raises():
    pts = np.array([[0.0, 0.0, -1.0]])
    p = Pose(np.eye(3), np.zeros(3))
    with pytest.raises(BehindCamera):
        reprojection_error(pts, p, p, K)


def test_empty_point_set_raises():
    p = Pose(np.eye(3), np.zeros(3))
    with pytest.raises(EmptyPointSet):
        add_error(np.zeros((0, 3)), p, p)
    with pytest.raises(EmptyPointSet):
        reprojection_error(np.zeros((0, 3)), p, p, K)


def test_accuracy_curve():
    assert accuracy_curve([0.0, 0.0, 0.0], [0.1, 1.0]) == [1.0, 1.0]
    assert accuracy_curve([1.0, 3.0], [2.0, 4.0]) == [0.5, 1.0]
    rng = np.random.default_rng(8)
    errors = rng.uniform(0, 10, 200)
    thresholds = np.sort(rng.uniform(0, 10, 9))
    curve = accuracy_curve(errors, thresholds)
    counting = [np.count_nonzero(errors <= t) / errors.size for t in thresholds]
    assert np.allclose(curve, counting)
    assert all(a <= b for a, b in zip(curve, curve[1:]))
    # failed frames (inf) lower the curve but never crash it
    curve_inf = accuracy_curve(list(errors) + [np.inf], thresholds)
    assert all(ci <= c for ci, c in zip(curve_inf, curve))


def test_accuracy_curve_unsorted_thresholds():
    with pytest.raises(ValueError):
        accuracy_curve([1.0], [2.0, 1.0])


def test_point_set_diameter():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 2.0, 0]])
    assert abs(point_set_diameter(pts) - np.sqrt(5.0)) < 1e-12


def test_fibonacci_surface_points():
    from ellipose.quadric import Ellipsoid
    rng = np.random.default_rng(9)
    e = Ellipsoid([0.3, -0.2, 0.5], [0.3, 0.2, 0.1], random_rotation(rng))
    pts = e.surface_points(512)
    assert pts.shape == (512, 3)
    # all points satisfy the surface equation
    local = (pts - e.center) @ e.rotation
    r = ((local / e.semi_axes) ** 2).sum(axis=1)
    assert np.abs(r - 1.0).max() < 1e-9
    # deterministic
    assert np.array_equal(pts, e.surface_points(512))
