"""Multi-view ellipsoid reconstruction from ellipse observations.

Each observation constrains the unknown dual quadric through
C*_i ~ P_i Q* P_i^T (equality up to a per-view scale). With one explicit
scale unknown per view the constraints are linear in (Q*, s_1..s_m); the
solution is the smallest right singular vector of the stacked system.
Image coordinates are pre-multiplied by K^-1 so pixel-scale entries do not
dominate the singular spectrum.
"""

from dataclasses import dataclass, field

import numpy as np

from .conic import Ellipse, ellipse_to_dual_conic, inscribed_ellipse
from .errors import (BehindCamera, DegenerateConfiguration, InsufficientViews,
                     SceneBuildError, SchemaMismatch)
from .quadric import (Camera, DualQuadric, Ellipsoid, dual_quadric_to_ellipsoid,
                      project_ellipsoid, project_point)

MIN_VIEWS = 3
# Smallest/second-smallest singular-value gap below which the nullspace is
# ambiguous (e.g. views sharing a camera center). Noise-free data sits
# above 1e3; genuinely rank-deficient systems fall to O(1).
NULLSPACE_RATIO_MIN = 10.0

_IJ4 = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
_IJ3 = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


@dataclass(frozen=True)
class Observation:
    """One calibrated ellipse observation of a labelled object."""

    camera: Camera
    ellipse: Ellipse
    label: str


@dataclass
class SceneObject:
    id: str
    class_label: str
    ellipsoid: Ellipsoid


@dataclass
class SceneModel:
    """Labelled ellipsoid cloud; ids are unique."""

    objects: list = field(default_factory=list)

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("scene object ids must be unique")

    def add(self, obj: SceneObject):
        if any(o.id == obj.id for o in self.objects):
            raise ValueError(f"duplicate object id {obj.id!r}")
        self.objects.append(obj)

    def get(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def __len__(self):
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)


def _vech6(C):
    return np.array([C[i, j] for i, j in _IJ3])


def _sym10_to_mat(q):
    Q = np.zeros((4, 4))
    for k, (i, j) in enumerate(_IJ4):
        Q[i, j] = Q[j, i] = q[k]
    return Q


def _view_block(pose):
    """6x10 linear map q -> vech6([R|t] Q(q) [R|t]^T)."""
    P = pose.matrix()
    A = np.empty((6, 10))
    for k, (i, j) in enumerate(_IJ4):
        E = np.zeros((4, 4))
        E[i, j] = E[j, i] = 1.0
        A[:, k] = _vech6(P @ E @ P.T)
    return A


def reconstruct_ellipsoid(observations) -> Ellipsoid:
    """Recover an ellipsoid from >= 3 calibrated ellipse observations.

    Raises InsufficientViews (< 3 views), DegenerateConfiguration (the
    homogeneous system has an ambiguous nullspace, e.g. coincident camera
    centers) or NotAnEllipsoid (the solution is not positive definite).
    """
    observations = list(observations)
    m = len(observations)
    if m < MIN_VIEWS:
        raise InsufficientViews(f"need >= {MIN_VIEWS} observations, got {m}")
    labels = {o.label for o in observations}
    if len(labels) > 1:
        raise ValueError(f"observations mix labels {sorted(labels)}")

    G = np.zeros((6 * m, 10 + m))
    for idx, obs in enumerate(observations):
        K = obs.camera.intrinsics.matrix()
        Kinv = np.linalg.inv(K)
        C = ellipse_to_dual_conic(obs.ellipse).m
        Cn = Kinv @ C @ Kinv.T
        Cn = Cn / np.linalg.norm(Cn)
        if Cn[2, 2] > 0:
            Cn = -Cn
        G[6 * idx:6 * idx + 6, :10] = _view_block(obs.camera.pose)
        G[6 * idx:6 * idx + 6, 10 + idx] = -_vech6(Cn)

    _, s, Vt = np.linalg.svd(G)
    ratio = s[-2] / max(s[-1], np.finfo(float).tiny)
    if ratio < NULLSPACE_RATIO_MIN:
        raise DegenerateConfiguration(
            f"ambiguous reconstruction (singular-value ratio {ratio:.2f})")
    # the nullspace vector is defined up to sign; normalization inside the
    # decomposition handles either one
    Q = _sym10_to_mat(Vt[-1, :10])
    return dual_quadric_to_ellipsoid(DualQuadric(Q))


def build_scene(annotations, cameras, classes=None) -> SceneModel:
    """Reconstruct one ellipsoid per label from bounding-box annotations.

    ``annotations`` is an iterable of (image_id, BBox, label); ``cameras``
    maps image ids to Camera views. Boxes are converted to their inscribed
    ellipses before reconstruction. ``classes`` optionally maps labels to
    class names (defaults to the label itself).

    Raises SceneBuildError listing each label whose reconstruction failed,
    and SchemaMismatch for an unknown image id.
    """
    classes = classes or {}
    by_label = {}
    for image_id, box, label in annotations:
        if image_id not in cameras:
            raise SchemaMismatch(f"annotation references unknown image id {image_id!r}")
        obs = Observation(cameras[image_id], inscribed_ellipse(box), label)
        by_label.setdefault(label, []).append(obs)

    scene = SceneModel()
    failures = {}
    for label in sorted(by_label):
        try:
            ellipsoid = reconstruct_ellipsoid(by_label[label])
        except Exception as exc:  # noqa: BLE001 - reported per label
            failures[label] = exc
            continue
        scene.add(SceneObject(label, classes.get(label, label), ellipsoid))
    if failures:
        raise SceneBuildError(failures)
    return scene


def reproject_annotations(scene: SceneModel, cameras):
    """Project every scene object into every camera.

    Returns (annotations, skipped): annotations are (image_id, label,
    Ellipse) for objects in front of the camera with the projected center
    inside the image; skipped lists (image_id, label, reason) strings.
    """
    annotations = []
    skipped = []
    for image_id in sorted(cameras):
        cam = cameras[image_id]
        for obj in scene:
            try:
                ellipse = project_ellipsoid(obj.ellipsoid, cam.pose, cam.intrinsics)
                center = project_point(obj.ellipsoid.center, cam.pose, cam.intrinsics)
            except BehindCamera as exc:
                skipped.append((image_id, obj.id, str(exc)))
                continue
            if not cam.contains(center):
                skipped.append((image_id, obj.id, "outside image"))
                continue
            annotations.append((image_id, obj.id, ellipse))
    return annotations, skipped
