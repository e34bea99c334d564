"""Ellipse representation and conic-matrix algebra.

An ellipse is stored by its physical attributes (center, semi-axes,
orientation). The homogeneous dual form is a symmetric 3x3 matrix defined
up to scale; this module fixes the convention that normalized dual conics
have -1 in the bottom-right entry, and all matrix comparisons happen after
that normalization.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateConic

# Eigenvalue ratio below which the 2x2 shape block is treated as degenerate.
DEGENERACY_RATIO = 1e-10


def _readonly(a, shape):
    a = np.array(a, dtype=float).reshape(shape)
    a.setflags(write=False)
    return a


def normalize_theta(theta, alpha, beta):
    """Wrap an orientation angle into [-pi/2, pi/2).

    The represented point set is unchanged (an ellipse is symmetric under a
    half-turn). Circles get theta = 0 so equal shapes compare equal.
    """
    if abs(alpha - beta) <= 1e-12 * max(alpha, beta):
        return 0.0
    t = float((theta + np.pi / 2) % np.pi - np.pi / 2)
    if t >= np.pi / 2:  # guard the half-open upper bound
        t = -np.pi / 2
    return t


@dataclass(frozen=True)
class Ellipse:
    """Image ellipse: center (pixels), semi-axes alpha >= beta > 0, theta.

    theta is the angle of the major semi-axis lying in the right half plane,
    in [-pi/2, pi/2).
    """

    center: np.ndarray
    semi_axes: np.ndarray
    theta: float

    def __post_init__(self):
        center = _readonly(self.center, (2,))
        axes = _readonly(self.semi_axes, (2,))
        if not (axes[0] >= axes[1] > 0.0):
            raise ValueError(f"semi-axes must satisfy alpha >= beta > 0, got {axes}")
        theta = normalize_theta(self.theta, axes[0], axes[1])
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "semi_axes", axes)
        object.__setattr__(self, "theta", theta)

    @property
    def alpha(self):
        return float(self.semi_axes[0])

    @property
    def beta(self):
        return float(self.semi_axes[1])

    def params(self):
        """(cx, cy, alpha, beta, theta) as a plain float array."""
        return np.array([self.center[0], self.center[1],
                         self.semi_axes[0], self.semi_axes[1], self.theta])

    def area(self):
        return float(np.pi * self.semi_axes[0] * self.semi_axes[1])

    def rotation(self):
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def boundary_points(self, n=128):
        """n points on the boundary at uniform parametric angle (CCW)."""
        phi = 2.0 * np.pi * np.arange(n) / n
        p = np.column_stack([self.semi_axes[0] * np.cos(phi),
                             self.semi_axes[1] * np.sin(phi)])
        return self.center + p @ self.rotation().T

    def is_close(self, other, tol=1e-9):
        """Same point set within tol (parameter-wise, scale-aware)."""
        scale = max(1.0, float(self.semi_axes[0]))
        return (np.abs(self.center - other.center).max() <= tol * scale
                and np.abs(self.semi_axes - other.semi_axes).max() <= tol * scale
                and _theta_close(self, other, tol))


def _theta_close(a, b, tol):
    if abs(a.semi_axes[0] - a.semi_axes[1]) <= 1e-9 * a.semi_axes[0]:
        return True  # circle: angle is meaningless
    d = abs(a.theta - b.theta)
    return min(d, np.pi - d) <= tol


@dataclass(frozen=True)
class DualConic:
    """Homogeneous dual conic: symmetric 3x3 matrix, defined up to scale."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(3, 3)
        if np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
            raise ValueError("dual conic matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def normalized(self):
        """Scale so the bottom-right entry equals -1."""
        w = self.m[2, 2]
        if w == 0.0:
            raise DegenerateConic("dual conic has zero bottom-right entry")
        return DualConic(self.m / -w)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: min corner strictly below max corner."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = _readonly(self.min_corner, (2,))
        hi = _readonly(self.max_corner, (2,))
        if not (lo < hi).all():
            raise ValueError(f"invalid box {lo} .. {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def size(self):
        return self.max_corner - self.min_corner

    @property
    def center(self):
        return 0.5 * (self.min_corner + self.max_corner)


def ellipse_to_dual_conic(e: Ellipse) -> DualConic:
    """Dual conic of an ellipse, normalized with bottom-right entry -1.

    The 2x2 block is R diag(alpha^2, beta^2) R^T - c c^T, the last column
    is (-c, -1); the adjugate of this matrix vanishes on the boundary.
    """
    A = e.rotation() @ np.diag(e.semi_axes ** 2) @ e.rotation().T
    c = e.center
    m = np.empty((3, 3))
    m[:2, :2] = A - np.outer(c, c)
    m[:2, 2] = -c
    m[2, :2] = -c
    m[2, 2] = -1.0
    return DualConic(m)


def dual_conic_to_ellipse(dc: DualConic) -> Ellipse:
    """Decompose a dual conic into ellipse parameters.

    Raises DegenerateConic when the matrix does not describe a real,
    non-degenerate ellipse (after normalizing the bottom-right entry to -1
    the 2x2 shape block must be positive definite).
    """
    m = dc.m
    scale = np.abs(m).max()
    if scale == 0.0 or abs(m[2, 2]) < DEGENERACY_RATIO * scale:
        raise DegenerateConic("conic center at infinity")
    m = m / -m[2, 2]
    c = -m[:2, 2]
    B = m[:2, :2] + np.outer(c, c)
    # closed-form symmetric 2x2 eigendecomposition
    half_tr = 0.5 * (B[0, 0] + B[1, 1])
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    disc = half_tr * half_tr - det
    root = np.sqrt(max(disc, 0.0))
    lam1, lam2 = half_tr + root, half_tr - root  # lam1 >= lam2
    if lam1 <= 0.0 or lam2 <= 0.0 or lam2 < DEGENERACY_RATIO * lam1:
        raise DegenerateConic("shape block is not positive definite")
    # half-angle form of the major-axis direction (no eigenvalue subtraction)
    theta = 0.5 * np.arctan2(2.0 * B[0, 1], B[0, 0] - B[1, 1])
    return Ellipse(c, np.sqrt([lam1, lam2]), theta)


def inscribed_ellipse(box: BBox) -> Ellipse:
    """Axis-aligned ellipse inscribed in a box (the detector baseline).

    A taller-than-wide box yields a vertical major axis, stored per the
    angle convention as theta = -pi/2.
    """
    hx, hy = 0.5 * box.size
    if hx >= hy:
        return Ellipse(box.center, [hx, hy], 0.0)
    return Ellipse(box.center, [hy, hx], -np.pi / 2)


def ellipse_bbox(e: Ellipse) -> BBox:
    """Tight axis-aligned bounding box of an ellipse."""
    a, b = e.semi_axes
    c, s = np.cos(e.theta), np.sin(e.theta)
    half = np.array([np.hypot(a * c, b * s), np.hypot(a * s, b * c)])
    return BBox(e.center - half, e.center + half)


def ellipse_iou(a: Ellipse, b: Ellipse) -> float:
    """Intersection-over-union of two ellipses.

    Computed by clipping area-matched 64-gon approximations against each
    other (deterministic, no sampling); the approximation error is below
    1e-3, and exact-zero output is only guaranteed when the gap between
    the ellipses exceeds ~1e-3 of their size.
    """
    return kernels.ellipse_iou(a.params(), b.params())
