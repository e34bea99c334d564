"""Synthetic desk-scale scenes, camera trajectories and detection rendering.

All generators are deterministic per seed (numpy Generator seeded with the
given value, or with [seed, index] sequences for derived streams). The
world up axis is +z; look-at cameras are built with zero roll.
"""

from dataclasses import dataclass, field

import numpy as np

from .association import Detection
from .conic import BBox, inscribed_ellipse, ellipse_bbox
from .errors import BehindCamera
from .quadric import (CameraIntrinsics, Ellipsoid, Pose, center_gap,
                      project_ellipsoid)
from .reconstruction import SceneModel, SceneObject
from .rotations import axis_angle, from_euler_xyz, random_rotation

DEFAULT_INTRINSICS = CameraIntrinsics(fx=450.0, fy=450.0, cx=320.0, cy=240.0)
DEFAULT_IMAGE_SIZE = (640, 480)

MODE_TRUE = "true_projection"
MODE_INSCRIBED = "inscribed_of_true_bbox"
RENDER_MODES = (MODE_TRUE, MODE_INSCRIBED)


@dataclass
class SimScene:
    """A generated scene: the model plus bookkeeping of its classes."""

    scene: SceneModel
    classes: list
    up_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


@dataclass
class Trajectory:
    """Ordered camera poses plus the generator parameters that made them."""

    poses: list
    radius: float
    height: float
    target: np.ndarray


def look_at(camera_position, target, up=(0.0, 0.0, 1.0), roll=0.0):
    """Zero-roll world-to-camera pose looking from a position at a target.

    Camera axes: x right, y down, z forward. ``roll`` (radians) rotates
    about the optical axis afterwards.
    """
    camera_position = np.asarray(camera_position, dtype=float)
    f = np.asarray(target, dtype=float) - camera_position
    fn = np.linalg.norm(f)
    if fn == 0.0:
        raise ValueError("camera position equals the look-at target")
    f = f / fn
    up = np.asarray(up, dtype=float)
    x = np.cross(f, up)
    xn = np.linalg.norm(x)
    if xn < 1e-12:
        raise ValueError("viewing direction parallel to the up axis")
    x = x / xn
    y = np.cross(f, x)
    R = np.vstack([x, y, f])
    if roll != 0.0:
        c, s = np.cos(roll), np.sin(roll)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) @ R
    return Pose(R, -R @ camera_position)


def generate_scene(seed, n_objects, duplicate_classes=0,
                   axis_range=(0.05, 0.5), region_radius=1.0,
                   elongation=None) -> SimScene:
    """Random non-intersecting ellipsoid cloud.

    ``duplicate_classes`` objects (0 or >= 2) share one class label; all
    others get distinct classes. Semi-axes are drawn from ``axis_range``
    (``elongation`` instead draws the major axis as a multiple of the
    others, for deliberately eccentric shapes). Objects are rejected until
    pairwise center distances exceed the sum of their max semi-axes.
    """
    if n_objects < 1:
        raise ValueError("need at least one object")
    if duplicate_classes == 1 or duplicate_classes > n_objects:
        raise ValueError("duplicate_classes must be 0 or in [2, n_objects]")
    rng = np.random.default_rng(seed)
    objects = []
    centers = []
    max_axes = []
    attempts = 0
    while len(objects) < n_objects:
        attempts += 1
        if attempts > 1000 * n_objects:
            raise RuntimeError("rejection sampling failed; region too crowded")
        if elongation is not None:
            minor = rng.uniform(*axis_range, size=2)
            major = minor.max() * rng.uniform(*elongation)
            axes = np.sort(np.concatenate([[major], minor]))[::-1]
        else:
            axes = np.sort(rng.uniform(*axis_range, size=3))[::-1]
        center = np.array([*rng.uniform(-region_radius, region_radius, 2),
                           rng.uniform(0.0, 0.6)])
        if any(np.linalg.norm(center - c) <= axes[0] + m + 0.02
               for c, m in zip(centers, max_axes)):
            continue
        idx = len(objects)
        objects.append(SceneObject(f"obj{idx:02d}", "", Ellipsoid(
            center, axes, random_rotation(rng))))
        centers.append(center)
        max_axes.append(axes[0])
    classes = []
    for idx, obj in enumerate(objects):
        label = "class_dup" if idx < duplicate_classes else f"class_{idx:02d}"
        obj.class_label = label
        classes.append(label)
    return SimScene(SceneModel(objects), classes)


def orbit_trajectory(seed, target, n_poses, radius=2.2, height=0.9,
                     radius_jitter=0.3, height_jitter=0.4, roll_range=0.0):
    """Seeded ring of look-at cameras around a target."""
    rng = np.random.default_rng(seed)
    target = np.asarray(target, dtype=float)
    poses = []
    for i in range(n_poses):
        a = 2.0 * np.pi * i / n_poses + rng.uniform(0, 2 * np.pi / n_poses)
        r = radius + rng.uniform(-radius_jitter, radius_jitter)
        h = height + rng.uniform(-height_jitter, height_jitter)
        pos = target + np.array([r * np.cos(a), r * np.sin(a), h])
        roll = rng.uniform(-roll_range, roll_range) if roll_range else 0.0
        poses.append(look_at(pos, target + rng.normal(0.0, 0.03, 3), roll=roll))
    return Trajectory(poses, radius, height, target)


def render_detections(scene: SceneModel, pose: Pose, k: CameraIntrinsics,
                      mode: str = MODE_TRUE, with_ids=False):
    """Exact detections of every object in front of the camera.

    ``true_projection`` emits the decomposed C* silhouette per object;
    ``inscribed_of_true_bbox`` emits the axis-aligned ellipse inscribed in
    the silhouette's bounding box (the baseline the projection-aware
    prediction improves upon). Behind-camera objects are skipped.

    Returns detections; with ``with_ids`` also the generating object id per
    detection.
    """
    if mode not in RENDER_MODES:
        raise ValueError(f"unknown render mode {mode!r}")
    detections = []
    ids = []
    for obj in scene:
        try:
            projected = project_ellipsoid(obj.ellipsoid, pose, k)
        except BehindCamera:
            continue
        box = ellipse_bbox(projected)
        ellipse = projected if mode == MODE_TRUE else inscribed_ellipse(box)
        detections.append(Detection(bbox=box, label=obj.class_label,
                                    score=1.0, ellipses={None: ellipse}))
        ids.append(obj.id)
    if with_ids:
        return detections, ids
    return detections


def perturb_bbox(detection: Detection, half_range: float, seed,
                 mode: str = MODE_INSCRIBED) -> Detection:
    """Shift each box corner coordinate by uniform(-half_range, half_range).

    In ``inscribed_of_true_bbox`` mode the candidate ellipses are recomputed
    from the noisy box; in ``true_projection`` mode they are kept (the
    projection-aware prediction does not depend on the box boundaries).
    """
    if half_range < 0:
        raise ValueError("half_range must be >= 0")
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-half_range, half_range, size=4)
    lo = detection.bbox.min_corner + shift[:2]
    hi = detection.bbox.max_corner + shift[2:]
    hi = np.maximum(hi, lo + 1e-6)  # keep the box non-empty under large noise
    box = BBox(lo, hi)
    if mode == MODE_INSCRIBED:
        ellipses = {None: inscribed_ellipse(box)}
    else:
        ellipses = dict(detection.ellipses)
    return Detection(bbox=box, label=detection.label,
                     score=detection.score, ellipses=ellipses)


def perturb_orientation(rotation, half_range_deg=2.0, seed=0):
    """Compose with a random per-axis Euler perturbation within bounds."""
    if half_range_deg < 0:
        raise ValueError("half_range_deg must be >= 0")
    rng = np.random.default_rng(seed)
    eps = np.radians(rng.uniform(-half_range_deg, half_range_deg, size=3))
    return np.asarray(rotation, dtype=float) @ from_euler_xyz(*eps)


def deform_scene(sim: SimScene, seed, magnitude) -> SimScene:
    """Random per-object deformation: semi-axes scaled by
    uniform(1-magnitude, 1+magnitude) per axis, rotation perturbed by at
    most magnitude * 45 degrees; centers fixed."""
    if not 0.0 <= magnitude < 1.0:
        raise ValueError("magnitude must be in [0, 1)")
    rng = np.random.default_rng(seed)
    objects = []
    for obj in sim.scene:
        e = obj.ellipsoid
        axes = e.semi_axes * rng.uniform(1.0 - magnitude, 1.0 + magnitude, size=3)
        angle = rng.uniform(-magnitude, magnitude) * np.radians(45.0)
        rot = axis_angle(rng.normal(size=3), angle) @ e.rotation
        objects.append(SceneObject(obj.id, obj.class_label,
                                   Ellipsoid(e.center, axes, rot)))
    return SimScene(SceneModel(objects), list(sim.classes), sim.up_axis.copy())


def center_gap_sweep(sizes=(0.30, 0.20, 0.15),
                     k: CameraIntrinsics = DEFAULT_INTRINSICS,
                     image_size=DEFAULT_IMAGE_SIZE,
                     azimuths_deg=tuple(np.arange(0.0, 41.0, 2.5)),
                     distances=(1.0, 1.5, 2.0, 3.0, 4.0)):
    """Center-approximation study: the gap between the projected-ellipse
    center and the projected ellipsoid center, per (azimuth, distance).

    ``sizes`` are full axis extents (meters); the ellipsoid sits axis-
    aligned with the camera frame, largest extents in the image plane.
    Cells with azimuth beyond the 70-degree field of view of the default
    camera are flagged in_fov = False. Returns a list of row dicts.
    """
    half = np.sort(np.asarray(sizes, dtype=float))[::-1] / 2.0
    fov_limit = np.degrees(np.arctan(0.5 * image_size[0] / k.fx))
    identity = Pose(np.eye(3), np.zeros(3))
    rows = []
    for dist in distances:
        if dist <= half.max():
            raise ValueError("distance must exceed the largest semi-axis")
        for az in azimuths_deg:
            a = np.radians(az)
            center = np.array([dist * np.sin(a), 0.0, dist * np.cos(a)])
            ellipsoid = Ellipsoid(center, half, np.eye(3))
            gap = center_gap(ellipsoid, identity, k)
            rows.append({"azimuth_deg": float(az), "distance_m": float(dist),
                         "gap_px": gap, "in_fov": bool(az <= fov_limit)})
    return rows
