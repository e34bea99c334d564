"""Pose-accuracy metrics: position/orientation errors, valid-pose test,
reprojection and ADD errors, and accuracy-vs-threshold curves."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPointSet
from .quadric import CameraIntrinsics, Pose, project_point
from .rotations import geodesic_angle_deg

VALID_POSITION_M = 0.20
VALID_ORIENTATION_DEG = 20.0


@dataclass(frozen=True)
class PoseError:
    """Camera-center distance (m) and geodesic rotation distance (deg)."""

    position: float
    orientation: float

    def __post_init__(self):
        if self.position < 0.0 or not 0.0 <= self.orientation <= 180.0:
            raise ValueError("invalid pose error values")


def pose_error(estimated: Pose, ground_truth: Pose) -> PoseError:
    """Position error between camera centers; orientation error
    arccos((trace(R_est R_gt^T) - 1) / 2) in degrees."""
    dp = float(np.linalg.norm(estimated.camera_center - ground_truth.camera_center))
    da = geodesic_angle_deg(estimated.rotation, ground_truth.rotation)
    return PoseError(dp, da)


def valid_pose(err: PoseError, pos_thresh=VALID_POSITION_M,
               rot_thresh=VALID_ORIENTATION_DEG) -> bool:
    """A pose is valid when both errors are below their thresholds."""
    return err.position < pos_thresh and err.orientation < rot_thresh


def reprojection_error(points, estimated: Pose, ground_truth: Pose,
                       k: CameraIntrinsics) -> float:
    """Mean pixel distance between the two projections of a 3D point set.

    Raises EmptyPointSet, and BehindCamera if any point is behind either
    camera."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise EmptyPointSet("reprojection error needs at least one point")
    est = np.array([project_point(p, estimated, k) for p in points])
    gt = np.array([project_point(p, ground_truth, k) for p in points])
    return float(np.linalg.norm(est - gt, axis=1).mean())


def add_error(points, estimated: Pose, ground_truth: Pose) -> float:
    """Mean 3D distance between the point set mapped by the two poses."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise EmptyPointSet("ADD needs at least one point")
    diff = estimated.transform(points) - ground_truth.transform(points)
    return float(np.linalg.norm(diff, axis=1).mean())


def point_set_diameter(points) -> float:
    """Largest pairwise distance (used for 'x% of diameter' thresholds)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise EmptyPointSet("diameter needs at least one point")
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


def accuracy_curve(errors, thresholds):
    """Fraction of errors at or below each threshold (non-decreasing).

    ``thresholds`` must be sorted ascending. Non-finite errors (failed
    frames) never count as correct."""
    thresholds = list(thresholds)
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        return [0.0 for _ in thresholds]
    finite = errors[np.isfinite(errors)]
    return [float((finite <= t).sum()) / errors.size for t in thresholds]
