"""Ellipsoid / dual-quadric algebra and perspective projection.

Poses are world-to-camera throughout: x_cam = R x_world + t. Projection of
a dual quadric follows C* = P Q* P^T with P = K [R | t]; decomposing C*
yields the exact elliptic silhouette of the ellipsoid.
"""

from dataclasses import dataclass

import numpy as np

from .conic import DualConic, Ellipse, dual_conic_to_ellipse
from .errors import BehindCamera, NotAnEllipsoid
from .rotations import is_rotation

ROTATION_TOL = 1e-10


def _readonly(a, shape):
    a = np.array(a, dtype=float).reshape(shape)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Ellipsoid:
    """3D landmark: center (m), semi-axes (m, all > 0), rotation (det +1)."""

    center: np.ndarray
    semi_axes: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        center = _readonly(self.center, (3,))
        axes = _readonly(self.semi_axes, (3,))
        rot = _readonly(self.rotation, (3, 3))
        if not (axes > 0.0).all():
            raise ValueError(f"semi-axes must be positive, got {axes}")
        if not is_rotation(rot, ROTATION_TOL):
            raise ValueError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "semi_axes", axes)
        object.__setattr__(self, "rotation", rot)

    @property
    def max_semi_axis(self):
        return float(self.semi_axes.max())

    def surface_points(self, n=512):
        """Deterministic Fibonacci-sphere sampling of the surface."""
        k = np.arange(n)
        z = 1.0 - (2.0 * k + 1.0) / n
        phi = k * np.pi * (3.0 - np.sqrt(5.0))
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        unit = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        return self.center + (unit * self.semi_axes) @ self.rotation.T


@dataclass(frozen=True)
class DualQuadric:
    """Homogeneous dual quadric: symmetric 4x4 matrix, defined up to scale."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(4, 4)
        if np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
            raise ValueError("dual quadric matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def normalized(self):
        w = self.m[3, 3]
        if w == 0.0:
            raise NotAnEllipsoid("dual quadric has zero bottom-right entry")
        return DualQuadric(self.m / -w)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")

    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    """Rigid world-to-camera transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _readonly(self.rotation, (3, 3))
        t = _readonly(self.translation, (3,))
        if not is_rotation(rot, ROTATION_TOL):
            raise ValueError("pose rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)

    @property
    def camera_center(self):
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def matrix(self):
        """3x4 matrix [R | t]."""
        return np.hstack([self.rotation, self.translation.reshape(3, 1)])

    def transform(self, points):
        """Map world points ((..., 3)) into camera coordinates."""
        return np.asarray(points) @ self.rotation.T + self.translation

    def compose(self, other):
        """self after other: world -> other -> self."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self):
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class Camera:
    """A calibrated view: intrinsics + pose + image size (pixels)."""

    intrinsics: CameraIntrinsics
    pose: Pose
    width: int = 640
    height: int = 480

    def projection_matrix(self):
        return self.intrinsics.matrix() @ self.pose.matrix()

    def contains(self, uv):
        u, v = uv
        return 0.0 <= u < self.width and 0.0 <= v < self.height


def ellipsoid_to_dual_quadric(e: Ellipsoid) -> DualQuadric:
    """Dual quadric of an ellipsoid, normalized with bottom-right entry -1."""
    S = e.rotation @ np.diag(e.semi_axes ** 2) @ e.rotation.T
    c = e.center
    m = np.empty((4, 4))
    m[:3, :3] = S - np.outer(c, c)
    m[:3, 3] = -c
    m[3, :3] = -c
    m[3, 3] = -1.0
    return DualQuadric(m)


def dual_quadric_to_ellipsoid(q: DualQuadric) -> Ellipsoid:
    """Decompose a dual quadric into canonical ellipsoid parameters.

    Canonical form: semi-axes sorted descending; the rotation has det +1
    with the leading entries of the first two columns non-negative.
    Raises NotAnEllipsoid when the normalized 3x3 block is not positive
    definite.
    """
    m = q.m
    scale = np.abs(m).max()
    if scale == 0.0 or abs(m[3, 3]) < 1e-12 * scale:
        raise NotAnEllipsoid("quadric center at infinity")
    m = m / -m[3, 3]
    c = -m[:3, 3]
    S = m[:3, :3] + np.outer(c, c)
    w, V = np.linalg.eigh(S)
    if w[0] <= 0.0 or w[0] < 1e-12 * w[2]:
        raise NotAnEllipsoid("3x3 block is not positive definite")
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    for k in range(2):
        lead = np.flatnonzero(np.abs(V[:, k]) > 1e-12)
        if lead.size and V[lead[0], k] < 0.0:
            V[:, k] = -V[:, k]
    V[:, 2] = np.cross(V[:, 0], V[:, 1])
    return Ellipsoid(c, np.sqrt(w), V)


def project_point(x, pose: Pose, k: CameraIntrinsics):
    """Pinhole projection of a world point to pixel coordinates."""
    xc = pose.transform(np.asarray(x, dtype=float))
    if xc[2] <= 0.0:
        raise BehindCamera(f"point at depth {xc[2]:.3g}")
    return np.array([k.fx * xc[0] / xc[2] + k.cx,
                     k.fy * xc[1] / xc[2] + k.cy])


def ensure_in_front(e: Ellipsoid, pose: Pose):
    """Conservative visibility test: center depth must exceed the largest
    semi-axis (the ellipsoid may not touch the principal plane)."""
    depth = pose.transform(e.center)[2]
    if depth <= 0.0 or depth - e.max_semi_axis <= 0.0:
        raise BehindCamera(
            f"ellipsoid at depth {depth:.3g} with max semi-axis "
            f"{e.max_semi_axis:.3g} is not strictly in front of the camera")
    return depth


def project_ellipsoid(e: Ellipsoid, pose: Pose, k: CameraIntrinsics) -> Ellipse:
    """Exact elliptic silhouette of an ellipsoid: decompose P Q* P^T."""
    ensure_in_front(e, pose)
    return project_dual_quadric(ellipsoid_to_dual_quadric(e), pose, k)


def project_dual_quadric(q: DualQuadric, pose: Pose, k: CameraIntrinsics) -> Ellipse:
    """Project a dual quadric without the visibility precondition check.

    Raises DegenerateConic when the image conic is not an ellipse.
    """
    P = k.matrix() @ pose.matrix()
    return dual_conic_to_ellipse(DualConic(P @ q.m @ P.T))


def projected_dual_conic(e: Ellipsoid, pose: Pose, k: CameraIntrinsics):
    """Normalized (bottom-right -1) dual conic matrix of the projection."""
    P = k.matrix() @ pose.matrix()
    C = P @ ellipsoid_to_dual_quadric(e).m @ P.T
    return DualConic(C).normalized().m


def center_gap(e: Ellipsoid, pose: Pose, k: CameraIntrinsics) -> float:
    """Pixel distance between the projected-ellipse center and the
    projection of the ellipsoid center (the minimal-solver approximation)."""
    ensure_in_front(e, pose)
    ellipse = project_ellipsoid(e, pose, k)
    point = project_point(e.center, pose, k)
    return float(np.hypot(*(ellipse.center - point)))
