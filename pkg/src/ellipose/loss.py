"""Sampled embedding-function distance between two ellipses.

An ellipse is lifted to a scalar field Phi(x) = (x-c)^T R D R^T (x-c) with
a diagonal D built from the semi-axes; the distance between two ellipses is
the sum of squared field differences over a fixed sampling grid. Summation
(not averaging) over the grid is used throughout. Four choices of D are
supported; the linear one avoids the alpha^-3 gradient blow-up of the
quadratic-equation field when an axis gets small.

Ellipses handed to the loss must live in the grid's coordinate frame; for
detector crops that is the normalized [0, 1]^2 frame (see CropFrame).
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .conic import BBox, Ellipse


class EmbeddingVariant(enum.IntEnum):
    """Diagonal of the central matrix as a function of the semi-axes."""

    INVERSE_SQUARE = kernels.VARIANT_INVERSE_SQUARE  # 1/a^2 (level set 1 = boundary)
    INVERSE = kernels.VARIANT_INVERSE                # 1/a
    SQUARE = kernels.VARIANT_SQUARE                  # a^2
    LINEAR = kernels.VARIANT_LINEAR                  # a (best conditioned)


@dataclass(frozen=True)
class SamplingGrid:
    """Regular rows x cols grid of cell-center points over a square domain.

    The default is 25x25 over [0, 1]^2 (normalized crop coordinates), so
    loss values do not depend on the crop pixel size. Points are strictly
    inside the domain.
    """

    rows: int = 25
    cols: int = 25
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or not self.hi > self.lo:
            raise ValueError("grid needs rows, cols >= 1 and hi > lo")

    @property
    def n_points(self):
        return self.rows * self.cols

    def points(self):
        """(rows*cols, 2) array of sample points (x varies fastest)."""
        side = self.hi - self.lo
        xs = self.lo + (np.arange(self.cols) + 0.5) * side / self.cols
        ys = self.lo + (np.arange(self.rows) + 0.5) * side / self.rows
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    @property
    def cell_area(self):
        side = self.hi - self.lo
        return (side / self.cols) * (side / self.rows)


@dataclass(frozen=True)
class CropFrame:
    """Square detection crop in image pixels, resized to ``side`` px input.

    ``box`` must be square; ``side`` is the input resolution the normalized
    parameters refer to (256 px for the standard crop size).
    """

    box: BBox
    side: float = 256.0

    def __post_init__(self):
        w, h = self.box.size
        if abs(w - h) > 1e-9 * max(w, h):
            raise ValueError("crop box must be square")
        if not self.side > 0:
            raise ValueError("crop side must be positive")

    @property
    def scale(self):
        """Image pixels per normalized unit: max(w, h) of the box."""
        return float(self.box.size.max())


def embed(e: Ellipse, x, variant: EmbeddingVariant = EmbeddingVariant.LINEAR):
    """Evaluate the embedding field of an ellipse at one or more points.

    Phi(c) = 0 and Phi grows along every ray from the center. For the
    INVERSE_SQUARE variant the level set Phi = 1 is the ellipse boundary.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    vals = kernels.embedding_values(e.params(), x.reshape(-1, 2), int(variant))
    return float(vals[0]) if single else vals


def loss(pred: Ellipse, gt: Ellipse, grid: SamplingGrid = SamplingGrid(),
         variant: EmbeddingVariant = EmbeddingVariant.LINEAR) -> float:
    """Sum over the grid of squared embedding differences (>= 0, symmetric)."""
    return kernels.embedding_loss(pred.params(), gt.params(), grid.points(),
                                  int(variant))


def loss_gradient(pred: Ellipse, gt: Ellipse, grid: SamplingGrid = SamplingGrid(),
                  variant: EmbeddingVariant = EmbeddingVariant.LINEAR):
    """Analytic gradient of ``loss`` wrt the predicted parameters.

    Returns (loss_value, gradient) with gradient components ordered
    (d/dcx, d/dcy, d/dalpha, d/dbeta, d/dtheta). Matches central finite
    differences to better than 1e-5 relative error away from the
    INVERSE_SQUARE small-axis instability.
    """
    value, grad = kernels.embedding_loss_grad(pred.params(), gt.params(),
                                              grid.points(), int(variant))
    return value, grad


def loss_gradient_fd(pred: Ellipse, gt: Ellipse, grid: SamplingGrid = SamplingGrid(),
                     variant: EmbeddingVariant = EmbeddingVariant.LINEAR,
                     step: float = 1e-6):
    """Central finite-difference gradient (the independent check)."""
    p0 = pred.params()
    grad = np.empty(5)
    pts = grid.points()
    for i in range(5):
        hi = p0.copy()
        lo = p0.copy()
        hi[i] += step
        lo[i] -= step
        fh = kernels.embedding_loss(hi, gt.params(), pts, int(variant))
        fl = kernels.embedding_loss(lo, gt.params(), pts, int(variant))
        grad[i] = (fh - fl) / (2.0 * step)
    return grad


def normalize_to_crop(e: Ellipse, frame: CropFrame) -> Ellipse:
    """Express an image-space ellipse in the crop's [0, 1]^2 frame.

    Translate by the box corner, then divide center and semi-axes by the
    box side; theta is unchanged.
    """
    s = frame.scale
    return Ellipse((e.center - frame.box.min_corner) / s, e.semi_axes / s, e.theta)


def denormalize_from_crop(e: Ellipse, frame: CropFrame) -> Ellipse:
    """Inverse of normalize_to_crop: back to full-image pixels."""
    s = frame.scale
    return Ellipse(e.center * s + frame.box.min_corner, e.semi_axes * s, e.theta)


def fit_by_gradient_descent(init: Ellipse, target: Ellipse,
                            grid: SamplingGrid = SamplingGrid(),
                            variant: EmbeddingVariant = EmbeddingVariant.LINEAR,
                            steps: int = 200, step_size: float = 1e-2,
                            min_axis: float = 1e-3) -> Ellipse:
    """Plain fixed-step gradient descent of the loss from ``init``.

    Used to compare how well the embedding variants behave as training
    signals; no line search on purpose.
    """
    p = init.params()
    for _ in range(steps):
        _, g = kernels.embedding_loss_grad(p, target.params(), grid.points(),
                                           int(variant))
        p = p - step_size * g
        p[2] = max(p[2], min_axis)
        p[3] = max(p[3], min_axis)
        if not np.isfinite(p).all():
            p = init.params()  # diverged; report the (failed) start point
            break
    a, b = max(p[2], p[3]), min(p[2], p[3])
    theta = p[4] if p[2] >= p[3] else p[4] + np.pi / 2
    return Ellipse(p[:2], [a, b], theta)
