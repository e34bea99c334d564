"""Hot-loop kernels with backend selection.

The compiled Cython module is preferred; the pure-NumPy twin is used when
the extension is missing. Set ELLIPOSE_KERNELS=python (or =native) to force
a backend. Both expose the same functions and agree to roundoff:

    ellipse_iou(params_a, params_b)          -> float
    ellipse_polygon(params)                  -> (64, 2) array
    convex_intersection_area(poly_a, poly_b) -> float
    polygon_area(poly)                       -> float
    embedding_values(params, points, v)      -> (n,) array
    embedding_loss(pred, gt, points, v)      -> float
    embedding_loss_grad(pred, gt, points, v) -> (float, (5,) array)

Ellipse parameter vectors are (cx, cy, alpha, beta, theta).
"""

import os

from . import _reference

_requested = os.environ.get("ELLIPOSE_KERNELS", "").strip().lower()

if _requested in ("", "native"):
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = _reference
        BACKEND = "python"
elif _requested in ("python", "reference"):
    _impl = _reference
    BACKEND = "python"
else:
    raise RuntimeError(f"unknown ELLIPOSE_KERNELS value: {_requested!r}")

N_POLY_VERTICES = _impl.N_POLY_VERTICES
VARIANT_INVERSE_SQUARE = _impl.VARIANT_INVERSE_SQUARE
VARIANT_INVERSE = _impl.VARIANT_INVERSE
VARIANT_SQUARE = _impl.VARIANT_SQUARE
VARIANT_LINEAR = _impl.VARIANT_LINEAR

ellipse_iou = _impl.ellipse_iou
ellipse_polygon = _impl.ellipse_polygon
convex_intersection_area = _impl.convex_intersection_area
polygon_area = _impl.polygon_area
embedding_values = _impl.embedding_values
embedding_loss = _impl.embedding_loss
embedding_loss_grad = _impl.embedding_loss_grad
