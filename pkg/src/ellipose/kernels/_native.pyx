# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: ellipse IoU via convex clipping and the sampled
embedding loss with analytic gradients.

Semantics match ellipose.kernels._reference; that module is the
readable specification of what these loops compute.
"""

from libc.math cimport cos, sin, sqrt, hypot, pi

import numpy as np

N_POLY_VERTICES = 64

cdef int _NV = 64
cdef int _MAXV = 160  # clip output of two convex 64-gons has <= 128 vertices

cdef double _AREA_MATCH = sqrt(2.0 * pi / (_NV * sin(2.0 * pi / _NV)))

cdef double[64] _COSP
cdef double[64] _SINP
cdef int _k
for _k in range(_NV):
    _COSP[_k] = cos(2.0 * pi * _k / _NV) * _AREA_MATCH
    _SINP[_k] = sin(2.0 * pi * _k / _NV) * _AREA_MATCH


cdef void _poly_of(double cx, double cy, double a, double b, double t,
                   double* xs, double* ys) noexcept nogil:
    cdef double ct = cos(t)
    cdef double st = sin(t)
    cdef double px, py
    cdef int k
    for k in range(_NV):
        px = a * _COSP[k]
        py = b * _SINP[k]
        xs[k] = cx + ct * px - st * py
        ys[k] = cy + st * px + ct * py


cdef double _clip_area(double* sx, double* sy, int n,
                       double* cx, double* cy, int m) noexcept nogil:
    cdef double bufx[160]
    cdef double bufy[160]
    cdef double outx[160]
    cdef double outy[160]
    cdef int i, k, nin, nout
    cdef double ax, ay, ex, ey, px, py, qx, qy, dpx, dpy, denom, u, area
    cdef bint p_in, q_in

    nin = n
    for i in range(n):
        bufx[i] = sx[i]
        bufy[i] = sy[i]

    for k in range(m):
        if nin == 0:
            return 0.0
        ax = cx[k]
        ay = cy[k]
        ex = cx[(k + 1) % m] - ax
        ey = cy[(k + 1) % m] - ay
        nout = 0
        qx = bufx[nin - 1]
        qy = bufy[nin - 1]
        q_in = ex * (qy - ay) - ey * (qx - ax) >= 0.0
        for i in range(nin):
            px = bufx[i]
            py = bufy[i]
            p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
            if p_in != q_in:
                dpx = px - qx
                dpy = py - qy
                denom = ex * dpy - ey * dpx
                if denom != 0.0 and nout < _MAXV:
                    u = (ex * (ay - qy) - ey * (ax - qx)) / denom
                    outx[nout] = qx + u * dpx
                    outy[nout] = qy + u * dpy
                    nout += 1
            if p_in and nout < _MAXV:
                outx[nout] = px
                outy[nout] = py
                nout += 1
            qx = px
            qy = py
            q_in = p_in
        nin = nout
        for i in range(nout):
            bufx[i] = outx[i]
            bufy[i] = outy[i]

    if nin < 3:
        return 0.0
    area = 0.0
    qx = bufx[nin - 1]
    qy = bufy[nin - 1]
    for i in range(nin):
        area += qx * bufy[i] - qy * bufx[i]
        qx = bufx[i]
        qy = bufy[i]
    return 0.5 * area


def ellipse_polygon(params):
    """Area-matched 64-gon approximation of an ellipse, CCW vertices."""
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    out = np.empty((_NV, 2))
    cdef double[:, ::1] o = out
    cdef double xs[64]
    cdef double ys[64]
    cdef int k
    _poly_of(p[0], p[1], p[2], p[3], p[4], xs, ys)
    for k in range(_NV):
        o[k, 0] = xs[k]
        o[k, 1] = ys[k]
    return out


def polygon_area(pts):
    """Shoelace area of a CCW polygon given as an (n, 2) array."""
    cdef double[:, ::1] p = np.ascontiguousarray(pts, dtype=np.float64)
    cdef int n = p.shape[0]
    if n < 3:
        return 0.0
    cdef double area = 0.0
    cdef double qx = p[n - 1, 0]
    cdef double qy = p[n - 1, 1]
    cdef int i
    for i in range(n):
        area += qx * p[i, 1] - qy * p[i, 0]
        qx = p[i, 0]
        qy = p[i, 1]
    return 0.5 * area


def convex_intersection_area(subject, clip):
    """Intersection area of two convex CCW polygons (Sutherland-Hodgman)."""
    cdef double[:, ::1] s = np.ascontiguousarray(subject, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(clip, dtype=np.float64)
    cdef int n = s.shape[0]
    cdef int m = c.shape[0]
    if n > _NV or m > _NV:
        raise ValueError("polygons limited to 64 vertices")
    cdef double sx[64]
    cdef double sy[64]
    cdef double cx[64]
    cdef double cy[64]
    cdef int i
    for i in range(n):
        sx[i] = s[i, 0]
        sy[i] = s[i, 1]
    for i in range(m):
        cx[i] = c[i, 0]
        cy[i] = c[i, 1]
    return _clip_area(sx, sy, n, cx, cy, m)


def ellipse_iou(pa, pb):
    """IoU of two ellipses via 64-gon clipping; approximation error <= 1e-3."""
    cdef double[::1] a = np.ascontiguousarray(pa, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(pb, dtype=np.float64)
    cdef int i
    cdef bint same = True
    for i in range(5):
        if a[i] != b[i]:
            same = False
            break
    if same:
        return 1.0
    # cheap reject: axis-aligned bounding boxes of the exact ellipses
    cdef double hxa = hypot(a[2] * cos(a[4]), a[3] * sin(a[4]))
    cdef double hya = hypot(a[2] * sin(a[4]), a[3] * cos(a[4]))
    cdef double hxb = hypot(b[2] * cos(b[4]), b[3] * sin(b[4]))
    cdef double hyb = hypot(b[2] * sin(b[4]), b[3] * cos(b[4]))
    if (a[0] - b[0] if a[0] > b[0] else b[0] - a[0]) > hxa + hxb:
        return 0.0
    if (a[1] - b[1] if a[1] > b[1] else b[1] - a[1]) > hya + hyb:
        return 0.0
    cdef double pax[64]
    cdef double pay[64]
    cdef double pbx[64]
    cdef double pby[64]
    _poly_of(a[0], a[1], a[2], a[3], a[4], pax, pay)
    _poly_of(b[0], b[1], b[2], b[3], b[4], pbx, pby)
    cdef double inter = _clip_area(pax, pay, _NV, pbx, pby, _NV)
    if inter <= 0.0:
        return 0.0
    cdef double area_a = pi * a[2] * a[3]
    cdef double area_b = pi * b[2] * b[3]
    if inter > area_a:
        inter = area_a
    if inter > area_b:
        inter = area_b
    return inter / (area_a + area_b - inter)


VARIANT_INVERSE_SQUARE = 0
VARIANT_INVERSE = 1
VARIANT_SQUARE = 2
VARIANT_LINEAR = 3


cdef inline double _fval(double x, int variant) noexcept nogil:
    if variant == 0:
        return 1.0 / (x * x)
    if variant == 1:
        return 1.0 / x
    if variant == 2:
        return x * x
    return x


cdef inline double _fder(double x, int variant) noexcept nogil:
    if variant == 0:
        return -2.0 / (x * x * x)
    if variant == 1:
        return -1.0 / (x * x)
    if variant == 2:
        return 2.0 * x
    return 1.0


def embedding_values(params, points, int variant):
    """Embedding field of an ellipse sampled at ``points`` ((n, 2) array)."""
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[:, ::1] xs = np.ascontiguousarray(points, dtype=np.float64)
    cdef int n = xs.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double fa = _fval(p[2], variant)
    cdef double fb = _fval(p[3], variant)
    cdef double ct = cos(p[4])
    cdef double st = sin(p[4])
    cdef double dx, dy, u1, u2
    cdef int i
    for i in range(n):
        dx = xs[i, 0] - p[0]
        dy = xs[i, 1] - p[1]
        u1 = ct * dx + st * dy
        u2 = -st * dx + ct * dy
        o[i] = fa * u1 * u1 + fb * u2 * u2
    return out


def embedding_loss(pred, gt, points, int variant):
    """Sum of squared embedding differences over the sample points."""
    cdef double[::1] p = np.ascontiguousarray(pred, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gt, dtype=np.float64)
    cdef double[:, ::1] xs = np.ascontiguousarray(points, dtype=np.float64)
    cdef int n = xs.shape[0]
    cdef double fap = _fval(p[2], variant)
    cdef double fbp = _fval(p[3], variant)
    cdef double ctp = cos(p[4])
    cdef double stp = sin(p[4])
    cdef double fag = _fval(g[2], variant)
    cdef double fbg = _fval(g[3], variant)
    cdef double ctg = cos(g[4])
    cdef double stg = sin(g[4])
    cdef double dx, dy, u1, u2, r, total
    cdef int i
    total = 0.0
    for i in range(n):
        dx = xs[i, 0] - p[0]
        dy = xs[i, 1] - p[1]
        u1 = ctp * dx + stp * dy
        u2 = -stp * dx + ctp * dy
        r = fap * u1 * u1 + fbp * u2 * u2
        dx = xs[i, 0] - g[0]
        dy = xs[i, 1] - g[1]
        u1 = ctg * dx + stg * dy
        u2 = -stg * dx + ctg * dy
        r -= fag * u1 * u1 + fbg * u2 * u2
        total += r * r
    return total


def embedding_loss_grad(pred, gt, points, int variant):
    """Loss and its analytic gradient wrt the predicted parameters.

    Gradient order: (d/dcx, d/dcy, d/dalpha, d/dbeta, d/dtheta).
    """
    cdef double[::1] p = np.ascontiguousarray(pred, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gt, dtype=np.float64)
    cdef double[:, ::1] xs = np.ascontiguousarray(points, dtype=np.float64)
    cdef int n = xs.shape[0]
    grad = np.zeros(5)
    cdef double[::1] gr = grad
    cdef double fap = _fval(p[2], variant)
    cdef double fbp = _fval(p[3], variant)
    cdef double dfa = _fder(p[2], variant)
    cdef double dfb = _fder(p[3], variant)
    cdef double ctp = cos(p[4])
    cdef double stp = sin(p[4])
    cdef double fag = _fval(g[2], variant)
    cdef double fbg = _fval(g[3], variant)
    cdef double ctg = cos(g[4])
    cdef double stg = sin(g[4])
    cdef double a11 = fap * ctp * ctp + fbp * stp * stp
    cdef double a12 = (fap - fbp) * ctp * stp
    cdef double a22 = fap * stp * stp + fbp * ctp * ctp
    cdef double dx, dy, gdx, gdy, u1, u2, gu1, gu2, r, adx, ady, total
    cdef double s_cx = 0.0, s_cy = 0.0, s_a = 0.0, s_b = 0.0, s_t = 0.0
    cdef int i
    total = 0.0
    for i in range(n):
        dx = xs[i, 0] - p[0]
        dy = xs[i, 1] - p[1]
        u1 = ctp * dx + stp * dy
        u2 = -stp * dx + ctp * dy
        r = fap * u1 * u1 + fbp * u2 * u2
        adx = a11 * dx + a12 * dy
        ady = a12 * dx + a22 * dy
        gdx = xs[i, 0] - g[0]
        gdy = xs[i, 1] - g[1]
        gu1 = ctg * gdx + stg * gdy
        gu2 = -stg * gdx + ctg * gdy
        r -= fag * gu1 * gu1 + fbg * gu2 * gu2
        total += r * r
        s_cx += r * adx
        s_cy += r * ady
        s_a += r * u1 * u1
        s_b += r * u2 * u2
        s_t += r * (adx * dy - ady * dx)
    gr[0] = -4.0 * s_cx
    gr[1] = -4.0 * s_cy
    gr[2] = 2.0 * dfa * s_a
    gr[3] = 2.0 * dfb * s_b
    gr[4] = 4.0 * s_t
    return total, grad
