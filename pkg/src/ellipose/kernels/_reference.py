"""Pure-NumPy fallback kernels.

Mirrors the semantics of the compiled module ``_native`` exactly; the two
backends agree to floating-point roundoff. Used automatically when the
extension is unavailable (see ellipose.kernels).
"""

import numpy as np

N_POLY_VERTICES = 64
# Scale that makes the regular 64-gon area equal to the ellipse area
# (pi*a*b), cancelling the first-order area bias of an inscribed polygon.
_AREA_MATCH = np.sqrt(2.0 * np.pi / (N_POLY_VERTICES * np.sin(2.0 * np.pi / N_POLY_VERTICES)))
_PHI = 2.0 * np.pi * np.arange(N_POLY_VERTICES) / N_POLY_VERTICES
_COS_PHI = np.cos(_PHI) * _AREA_MATCH
_SIN_PHI = np.sin(_PHI) * _AREA_MATCH


def ellipse_polygon(params):
    """Area-matched 64-gon approximation of an ellipse, CCW vertices.

    ``params`` is (cx, cy, alpha, beta, theta).
    """
    cx, cy, a, b, t = params
    ct, st = np.cos(t), np.sin(t)
    px = a * _COS_PHI
    py = b * _SIN_PHI
    return np.column_stack([cx + ct * px - st * py, cy + st * px + ct * py])


def polygon_area(pts):
    """Shoelace area of a CCW polygon given as an (n, 2) array."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_intersection_area(subject, clip):
    """Intersection area of two convex CCW polygons (Sutherland-Hodgman)."""
    out = [tuple(p) for p in np.asarray(subject, dtype=float)]
    clip = np.asarray(clip, dtype=float)
    m = len(clip)
    for k in range(m):
        if not out:
            return 0.0
        ax, ay = clip[k]
        bx, by = clip[(k + 1) % m]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        sx, sy = inp[-1]
        s_in = ex * (sy - ay) - ey * (sx - ax) >= 0.0
        for px, py in inp:
            p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
            if p_in != s_in:
                # segment crosses the clip line; append the crossing point
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    u = (ex * (ay - sy) - ey * (ax - sx)) / denom
                    out.append((sx + u * dx, sy + u * dy))
            if p_in:
                out.append((px, py))
            sx, sy, s_in = px, py, p_in
    if len(out) < 3:
        return 0.0
    area = 0.0
    x0, y0 = out[-1]
    for x1, y1 in out:
        area += x0 * y1 - y0 * x1
        x0, y0 = x1, y1
    return 0.5 * area


def _half_extents(params):
    _, _, a, b, t = params
    return (np.hypot(a * np.cos(t), b * np.sin(t)),
            np.hypot(a * np.sin(t), b * np.cos(t)))


def ellipse_iou(pa, pb):
    """IoU of two ellipses via 64-gon clipping; approximation error <= 1e-3."""
    pa = np.asarray(pa, dtype=float)
    pb = np.asarray(pb, dtype=float)
    if np.array_equal(pa, pb):
        return 1.0
    # cheap reject: axis-aligned bounding boxes of the exact ellipses
    hxa, hya = _half_extents(pa)
    hxb, hyb = _half_extents(pb)
    if abs(pa[0] - pb[0]) > hxa + hxb or abs(pa[1] - pb[1]) > hya + hyb:
        return 0.0
    inter = convex_intersection_area(ellipse_polygon(pa), ellipse_polygon(pb))
    if inter <= 0.0:
        return 0.0
    area_a = np.pi * pa[2] * pa[3]
    area_b = np.pi * pb[2] * pb[3]
    inter = min(inter, area_a, area_b)
    return float(inter / (area_a + area_b - inter))


# Embedding variants: diagonal entries of the central matrix as a function
# of a semi-axis length, and their derivatives.
VARIANT_INVERSE_SQUARE = 0
VARIANT_INVERSE = 1
VARIANT_SQUARE = 2
VARIANT_LINEAR = 3


def _fval(x, variant):
    if variant == VARIANT_INVERSE_SQUARE:
        return 1.0 / (x * x)
    if variant == VARIANT_INVERSE:
        return 1.0 / x
    if variant == VARIANT_SQUARE:
        return x * x
    return x


def _fder(x, variant):
    if variant == VARIANT_INVERSE_SQUARE:
        return -2.0 / (x * x * x)
    if variant == VARIANT_INVERSE:
        return -1.0 / (x * x)
    if variant == VARIANT_SQUARE:
        return 2.0 * x
    return 1.0


def _fields(params, points, variant):
    cx, cy, a, b, t = params
    fa, fb = _fval(a, variant), _fval(b, variant)
    ct, st = np.cos(t), np.sin(t)
    dx = points[:, 0] - cx
    dy = points[:, 1] - cy
    u1 = ct * dx + st * dy
    u2 = -st * dx + ct * dy
    return fa * u1 * u1 + fb * u2 * u2, (dx, dy, u1, u2, fa, fb, ct, st)


def embedding_values(params, points, variant):
    """Embedding field of an ellipse sampled at ``points`` ((n, 2) array)."""
    phi, _ = _fields(params, np.asarray(points, dtype=float), variant)
    return phi


def embedding_loss(pred, gt, points, variant):
    """Sum of squared embedding differences over the sample points."""
    points = np.asarray(points, dtype=float)
    phi_p, _ = _fields(pred, points, variant)
    phi_g, _ = _fields(gt, points, variant)
    r = phi_p - phi_g
    return float(r @ r)


def embedding_loss_grad(pred, gt, points, variant):
    """Loss and its analytic gradient wrt the predicted parameters.

    Gradient order: (d/dcx, d/dcy, d/dalpha, d/dbeta, d/dtheta).
    """
    points = np.asarray(points, dtype=float)
    phi_p, (dx, dy, u1, u2, fa, fb, ct, st) = _fields(pred, points, variant)
    phi_g, _ = _fields(gt, points, variant)
    r = phi_p - phi_g
    a11 = fa * ct * ct + fb * st * st
    a12 = (fa - fb) * ct * st
    a22 = fa * st * st + fb * ct * ct
    adx = a11 * dx + a12 * dy
    ady = a12 * dx + a22 * dy
    da = _fder(pred[2], variant)
    db = _fder(pred[3], variant)
    grad = np.array([
        -4.0 * np.dot(r, adx),
        -4.0 * np.dot(r, ady),
        2.0 * da * np.dot(r, u1 * u1),
        2.0 * db * np.dot(r, u2 * u2),
        4.0 * np.dot(r, adx * dy - ady * dx),
    ])
    return float(r @ r), grad
