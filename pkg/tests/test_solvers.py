import numpy as np
import pytest

from ellipose.conic import ellipse_bbox, inscribed_ellipse
from ellipose.errors import DegenerateConfiguration
from ellipose.metrics import pose_error
from ellipose.quadric import (CameraIntrinsics, Ellipsoid, Pose,
                              project_ellipsoid, project_point)
from ellipose.rotations import geodesic_angle_deg, random_rotation
from ellipose.simulate import look_at, perturb_orientation
from ellipose.solvers import (Correspondence, conic_residual, p2e_zero_roll,
                              p3p_centers, position_from_orientation,
                              refine_pose)

K = CameraIntrinsics(450.0, 450.0, 320.0, 240.0)


def fake_ellipse_at(uv, size=20.0):
    from ellipose.conic import Ellipse
    return Ellipse(uv, [size, size * 0.8], 0.2)


def random_world_points(rng, n=3, spread=0.8):
    while True:
        pts = rng.uniform(-spread, spread, (n, 3)) + [0, 0, 0.3]
        if n < 3:
            return pts
        cross = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        if np.linalg.norm(cross) > 0.05:
            return pts


def random_camera(rng, target=(0.0, 0.0, 0.3), roll=0.6):
    a = rng.uniform(0, 2 * np.pi)
    pos = np.asarray(target) + np.array([2.2 * np.cos(a), 2.2 * np.sin(a),
                                         rng.uniform(0.5, 1.3)])
    return look_at(pos, np.asarray(target) + rng.normal(0, 0.05, 3),
                   roll=rng.uniform(-roll, roll))


def center_correspondences(points, pose, rng):
    out = []
    for i, p in enumerate(points):
        uv = project_point(p, pose, K)
        axes = np.sort(rng.uniform(0.05, 0.15, 3))[::-1]
        out.append(Correspondence(fake_ellipse_at(uv),
                                  Ellipsoid(p, axes, random_rotation(rng)),
                                  f"o{i}"))
    return out


# --- P3P ---------------------------------------------------------------------

def test_p3p_recovers_exact_pose():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        pose = random_camera(rng)
        pts = random_world_points(rng)
        corr = center_correspondences(pts, pose, rng)
        candidates = p3p_centers(corr, K)
        assert len(candidates) <= 4
        best = min(candidates,
                   key=lambda c: np.linalg.norm(c.pose.translation - pose.translation))
        assert geodesic_angle_deg(best.pose.rotation, pose.rotation) < 1e-6
        assert np.linalg.norm(best.pose.camera_center - pose.camera_center) < 1e-9


def test_p3p_candidates_reproject_exactly():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pose = random_camera(rng)
        pts = random_world_points(rng)
        corr = center_correspondences(pts, pose, rng)
        for cand in p3p_centers(corr, K):
            for c in corr:
                uv = project_point(c.ellipsoid.center, cand.pose, K)
                assert np.linalg.norm(uv - c.ellipse.center) < 1e-6


def test_p3p_collinear_raises():
    rng = np.random.default_rng(2)
    pose = random_camera(rng)
    pts = np.array([[0.0, 0.0, 0.3], [0.2, 0.1, 0.3], [0.4, 0.2, 0.3]])
    corr = center_correspondences(pts, pose, rng)
    with pytest.raises(DegenerateConfiguration):
        p3p_centers(corr, K)


def test_p3p_coincident_image_centers_raise():
    rng = np.random.default_rng(3)
    pose = random_camera(rng)
    pts = random_world_points(rng)
    corr = center_correspondences(pts, pose, rng)
    corr[1] = Correspondence(corr[0].ellipse, corr[1].ellipsoid, "o1")
    with pytest.raises(DegenerateConfiguration):
        p3p_centers(corr, K)


def test_p3p_from_projected_ellipse_centers_small_error():
    # using the true-projection ellipse centers (not the projected 3D
    # centers) keeps the pose within the center-gap-induced bound
    rng = np.random.default_rng(4)
    errs_pos, errs_rot = [], []
    for _ in range(100):
        pose = random_camera(rng)
        pts = random_world_points(rng, spread=0.5)
        corr = []
        for i, p in enumerate(pts):
            axes = np.sort(rng.uniform(0.04, 0.10, 3))[::-1]
            q = Ellipsoid(p, axes, random_rotation(rng))
            corr.append(Correspondence(project_ellipsoid(q, pose, K), q, f"o{i}"))
        try:
            candidates = p3p_centers(corr, K)
        except DegenerateConfiguration:
            continue
        best = min(candidates,
                   key=lambda c: np.linalg.norm(c.pose.camera_center - pose.camera_center))
        err = pose_error(best.pose, pose)
        errs_pos.append(err.position)
        errs_rot.append(err.orientation)
    assert np.median(errs_pos) < 0.01
    assert np.median(errs_rot) < 0.5


# --- P2E ---------------------------------------------------------------------

def zero_roll_camera(rng, target=(0.0, 0.0, 0.3)):
    a = rng.uniform(0, 2 * np.pi)
    pos = np.asarray(target) + np.array([2.0 * np.cos(a), 2.0 * np.sin(a),
                                         rng.uniform(0.5, 1.2)])
    return look_at(pos, np.asarray(target) + rng.normal(0, 0.05, 3))


def two_object_scene(rng, pose):
    corr = []
    for i in range(2):
        center = np.array([0.5 - i * 1.0 + rng.uniform(-0.2, 0.2),
                           rng.uniform(-0.4, 0.4), rng.uniform(0.1, 0.5)])
        axes = np.sort(rng.uniform(0.04, 0.12, 3))[::-1]
        q = Ellipsoid(center, axes, random_rotation(rng))
        corr.append(Correspondence(project_ellipsoid(q, pose, K), q, f"o{i}"))
    return corr


def best_by_iou(candidates, corr):
    from ellipose import kernels
    from ellipose.errors import BehindCamera, DegenerateConic

    def score(c):
        total = 0.0
        for x in corr:
            try:
                proj = project_ellipsoid(x.ellipsoid, c.pose, K)
            except (BehindCamera, DegenerateConic):
                return 0.0
            total += kernels.ellipse_iou(x.ellipse.params(), proj.params())
        return total

    return max(candidates, key=score)


def test_p2e_zero_roll_recovers_pose():
    rng = np.random.default_rng(5)
    errs = []
    for _ in range(30):
        pose = zero_roll_camera(rng)
        corr = two_object_scene(rng, pose)
        candidates = p2e_zero_roll(corr, K, np.radians(0.1))
        best = best_by_iou(candidates, corr)
        err = pose_error(best.pose, pose)
        errs.append((err.position, err.orientation))
    pos = np.array([e[0] for e in errs])
    rot = np.array([e[1] for e in errs])
    assert np.median(pos) < 0.01
    assert np.median(rot) < 0.5


def test_p2e_candidates_are_exactly_zero_roll():
    rng = np.random.default_rng(6)
    pose = zero_roll_camera(rng)
    corr = two_object_scene(rng, pose)
    cands = p2e_zero_roll(corr, K, np.radians(2.0))
    assert len(cands) > 10
    for c in cands:
        x_axis_world = c.pose.rotation.T @ np.array([1.0, 0.0, 0.0])
        assert abs(x_axis_world[2]) < 1e-12
        # both centers reproject exactly for every family member
        for x in corr:
            uv = project_point(x.ellipsoid.center, c.pose, K)
            assert np.linalg.norm(uv - x.ellipse.center) < 1e-6


def test_p2e_rolled_camera_fails_as_documented():
    rng = np.random.default_rng(7)
    saw_large_error = 0
    for _ in range(10):
        target = np.array([0.0, 0.0, 0.3])
        a = rng.uniform(0, 2 * np.pi)
        pos = target + np.array([2.0 * np.cos(a), 2.0 * np.sin(a), 0.8])
        pose = look_at(pos, target, roll=np.radians(10.0))
        corr = two_object_scene(rng, pose)
        best = best_by_iou(p2e_zero_roll(corr, K, np.radians(0.5)), corr)
        if pose_error(best.pose, pose).orientation >= 5.0:
            saw_large_error += 1
    assert saw_large_error >= 9


def test_p2e_coincident_centers_degenerate():
    rng = np.random.default_rng(8)
    pose = zero_roll_camera(rng)
    corr = two_object_scene(rng, pose)
    corr[1] = Correspondence(corr[1].ellipse,
                             Ellipsoid(corr[0].ellipsoid.center,
                                       corr[1].ellipsoid.semi_axes,
                                       corr[1].ellipsoid.rotation), "o1")
    with pytest.raises(DegenerateConfiguration):
        p2e_zero_roll(corr, K)


def test_p2e_candidate_ordering_deterministic():
    rng = np.random.default_rng(9)
    pose = zero_roll_camera(rng)
    corr = two_object_scene(rng, pose)
    a = p2e_zero_roll(corr, K, np.radians(1.0))
    b = p2e_zero_roll(corr, K, np.radians(1.0))
    assert [c.index for c in a] == [c.index for c in b]
    assert all(x.index <= y.index for x, y in zip(a, a[1:]))


# --- single object -----------------------------------------------------------

def one_object_case(rng, axis_range=(0.08, 0.2)):
    center = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                       rng.uniform(0.1, 0.4)])
    axes = np.sort(rng.uniform(*axis_range, 3))[::-1]
    q = Ellipsoid(center, axes, random_rotation(rng))
    pose = zero_roll_camera(rng, target=center)
    return Correspondence(project_ellipsoid(q, pose, K), q, "o0"), pose


def test_position_from_exact_orientation():
    rng = np.random.default_rng(10)
    for _ in range(50):
        corr, pose = one_object_case(rng)
        est = position_from_orientation(corr, pose.rotation, K)
        assert np.linalg.norm(est.camera_center - pose.camera_center) < 1e-4
        assert np.linalg.norm(conic_residual(corr, est, K)) < 1e-8


def test_position_residual_zero_at_truth():
    rng = np.random.default_rng(11)
    corr, pose = one_object_case(rng)
    assert np.linalg.norm(conic_residual(corr, pose, K)) < 1e-10


def test_position_with_noisy_orientation():
    rng = np.random.default_rng(12)
    rel = []
    for i in range(100):
        corr, pose = one_object_case(rng)
        noisy = perturb_orientation(pose.rotation, 2.0, seed=i)
        est = position_from_orientation(corr, noisy, K)
        dist = np.linalg.norm(pose.camera_center - corr.ellipsoid.center)
        rel.append(np.linalg.norm(est.camera_center - pose.camera_center) / dist)
    assert np.median(rel) < 0.05


def test_position_inscribed_worse_than_true():
    rng = np.random.default_rng(13)
    true_better = 0
    n = 200
    for _ in range(n):
        corr, pose = one_object_case(rng)
        inscribed = Correspondence(inscribed_ellipse(ellipse_bbox(corr.ellipse)),
                                   corr.ellipsoid, corr.object_id)
        est_true = position_from_orientation(corr, pose.rotation, K)
        est_box = position_from_orientation(inscribed, pose.rotation, K)
        err_true = np.linalg.norm(est_true.camera_center - pose.camera_center)
        err_box = np.linalg.norm(est_box.camera_center - pose.camera_center)
        if err_true < err_box:
            true_better += 1
    assert true_better >= 0.9 * n


# --- similarity invariance ----------------------------------------------------

def test_solvers_commute_with_rigid_motion():
    rng = np.random.default_rng(14)
    M = Pose(random_rotation(rng), rng.uniform(-1, 1, 3))
    pose = random_camera(rng)
    pts = random_world_points(rng)
    corr = center_correspondences(pts, pose, rng)
    moved = [Correspondence(c.ellipse,
                            Ellipsoid(M.transform(c.ellipsoid.center),
                                      c.ellipsoid.semi_axes,
                                      M.rotation @ c.ellipsoid.rotation),
                            c.object_id)
             for c in corr]
    orig = p3p_centers(corr, K)
    trans = p3p_centers(moved, K)
    assert len(orig) == len(trans)
    for a, b in zip(orig, trans):
        expected = a.pose.compose(M.inverse())
        assert geodesic_angle_deg(expected.rotation, b.pose.rotation) < 1e-7
        assert np.linalg.norm(expected.translation - b.pose.translation) < 1e-8


# --- refinement ----------------------------------------------------------------

def test_refine_pose_reaches_machine_precision():
    rng = np.random.default_rng(15)
    for _ in range(20):
        pose = random_camera(rng)
        pts = random_world_points(rng, spread=0.5)
        corr = []
        for i, p in enumerate(pts):
            axes = np.sort(rng.uniform(0.05, 0.15, 3))[::-1]
            q = Ellipsoid(p, axes, random_rotation(rng))
            corr.append(Correspondence(project_ellipsoid(q, pose, K), q, f"o{i}"))
        rough = Pose(pose.rotation @ perturb_orientation(np.eye(3), 0.5, seed=1),
                     pose.translation + rng.uniform(-0.01, 0.01, 3))
        polished = refine_pose(rough, corr, K)
        err = pose_error(polished, pose)
        assert err.position < 1e-6
        assert err.orientation < 1e-6
