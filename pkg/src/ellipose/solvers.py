"""Minimal camera-pose solvers from ellipse-ellipsoid correspondences.

Three regimes, by number of objects:
  * >= 3: P3P between the ellipse centers and the ellipsoid centers
    (Grunert quartic in a depth ratio; all real roots kept).
  * 2: one-parameter sweep of zero-roll poses that exactly reproject both
    ellipsoid centers onto both ellipse centers.
  * 1 + known orientation: position recovered by minimizing the Frobenius
    discrepancy between the observed dual conic and the projected one.

The world up direction is +z; "zero roll" means the camera x-axis is
horizontal and the camera is upright.
"""

from dataclasses import dataclass

import numpy as np

from .conic import Ellipse, ellipse_to_dual_conic
from .errors import DegenerateConfiguration, NonConvergence, NoSolution
from .quadric import CameraIntrinsics, Ellipsoid, Pose, projected_dual_conic
from .rotations import exp_so3

WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Correspondence:
    """A detected ellipse paired with a scene ellipsoid."""

    ellipse: Ellipse
    ellipsoid: Ellipsoid
    object_id: str = ""


@dataclass(frozen=True)
class PoseCandidate:
    """A pose plus where it came from (solver name, root / sweep index)."""

    pose: Pose
    solver: str
    index: tuple = ()


def _bearing(k: CameraIntrinsics, uv):
    b = np.array([(uv[0] - k.cx) / k.fx, (uv[1] - k.cy) / k.fy, 1.0])
    return b / np.linalg.norm(b)


def _kabsch(world, cam):
    """Rigid world->camera from paired 3D points (camera = R world + t)."""
    wc = world.mean(axis=0)
    cc = cam.mean(axis=0)
    H = (world - wc).T @ (cam - cc)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return Pose(R, cc - R @ wc)


def p3p_centers(correspondences, k: CameraIntrinsics):
    """Pose candidates from three center correspondences (Grunert P3P).

    Returns up to four PoseCandidates, each exactly reprojecting the three
    ellipsoid centers onto the three ellipse centers. Raises
    DegenerateConfiguration for collinear 3D centers or coincident image
    centers, NoSolution when the quartic has no usable real root.
    """
    correspondences = list(correspondences)
    if len(correspondences) != 3:
        raise ValueError("p3p_centers needs exactly 3 correspondences")
    pw = np.array([c.ellipsoid.center for c in correspondences])
    uv = np.array([c.ellipse.center for c in correspondences])

    scale = max(np.linalg.norm(pw[1] - pw[0]), np.linalg.norm(pw[2] - pw[0]))
    cross = np.cross(pw[1] - pw[0], pw[2] - pw[0])
    if scale == 0.0 or np.linalg.norm(cross) < 1e-10 * scale * scale:
        raise DegenerateConfiguration("3D centers are collinear")
    for i in range(3):
        if np.linalg.norm(uv[i] - uv[(i + 1) % 3]) < 1e-9:
            raise DegenerateConfiguration("image centers coincide")

    j1, j2, j3 = (_bearing(k, uv[i]) for i in range(3))
    a = np.linalg.norm(pw[1] - pw[2])
    b = np.linalg.norm(pw[0] - pw[2])
    c = np.linalg.norm(pw[0] - pw[1])
    ca = float(j2 @ j3)
    cb = float(j1 @ j3)
    cg = float(j1 @ j2)
    a2, b2, c2 = a * a, b * b, c * c
    # Grunert: quartic in v = s3/s1
    A = (a2 - c2) / b2
    B = (a2 + c2) / b2
    C = (b2 - c2) / b2
    D = (b2 - a2) / b2
    q4 = (A - 1.0) ** 2 - 4.0 * c2 / b2 * ca * ca
    q3 = 4.0 * (A * (1.0 - A) * cb - (1.0 - B) * ca * cg + 2.0 * c2 / b2 * ca * ca * cb)
    q2 = 2.0 * (A * A - 1.0 + 2.0 * A * A * cb * cb + 2.0 * C * ca * ca
                - 4.0 * B * ca * cb * cg + 2.0 * D * cg * cg)
    q1 = 4.0 * (-A * (1.0 + A) * cb + 2.0 * a2 / b2 * cg * cg * cb - (1.0 - B) * ca * cg)
    q0 = (1.0 + A) ** 2 - 4.0 * a2 / b2 * cg * cg
    coeffs = np.array([q4, q3, q2, q1, q0])
    if np.abs(coeffs).max() == 0.0:
        raise NoSolution("degenerate quartic")

    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-4 * np.maximum(1.0, np.abs(roots.real))].real
    # polish on the real axis and deduplicate
    poly = np.polynomial.Polynomial(coeffs[::-1])
    dpoly = poly.deriv()
    polished = []
    for v in np.sort(real):
        for _ in range(3):
            dv = dpoly(v)
            if dv == 0.0:
                break
            v = v - poly(v) / dv
        if not polished or abs(v - polished[-1]) > 1e-9 * max(1.0, abs(v)):
            polished.append(float(v))

    candidates = []
    for idx, v in enumerate(polished):
        denom = 2.0 * (cg - v * ca)
        if abs(denom) < 1e-12:
            continue
        u = ((-1.0 + A) * v * v - 2.0 * A * cb * v + 1.0 + A) / denom
        s1sq = c2 / (1.0 + u * u - 2.0 * u * cg)
        if s1sq <= 0.0:
            continue
        s1 = np.sqrt(s1sq)
        s2, s3 = u * s1, v * s1
        if s1 <= 0.0 or s2 <= 0.0 or s3 <= 0.0:
            continue
        cam = np.array([s1 * j1, s2 * j2, s3 * j3])
        pose = _polish_point_pose(_kabsch(pw, cam), pw, uv, k)
        candidates.append(PoseCandidate(pose, "p3p", (idx,)))
    if not candidates:
        raise NoSolution("no real root with positive depths")
    return candidates


def _polish_point_pose(pose, world, uv, k: CameraIntrinsics):
    """Few damped Gauss-Newton steps on point reprojection residuals.

    Near-double quartic roots limit the raw root accuracy to ~sqrt(eps);
    polishing against the original correspondences restores full precision
    without changing which solution branch is returned.
    """
    R0 = pose.rotation

    def residual(x):
        p = Pose(R0 @ exp_so3(x[:3]), x[3:])
        out = np.empty(2 * len(world))
        for i, (w, target) in enumerate(zip(world, uv)):
            xc = p.transform(w)
            if xc[2] <= 0.0:
                raise DegenerateConfiguration("behind camera during polish")
            out[2 * i] = k.fx * xc[0] / xc[2] + k.cx - target[0]
            out[2 * i + 1] = k.fy * xc[1] / xc[2] + k.cy - target[1]
        return out

    x0 = np.concatenate([np.zeros(3), pose.translation])
    try:
        x, _, converged = _lm_minimize(residual, x0, max_iter=15, step_tol=1e-14)
    except NonConvergence:
        return pose
    if not converged:
        return pose
    return Pose(R0 @ exp_so3(x[:3]), x[3:])


def _upright_basis(direction):
    """Orthonormal triad (d, e2, e3) with d given; degenerate if d || up."""
    d = direction / np.linalg.norm(direction)
    w = WORLD_UP - (WORLD_UP @ d) * d
    n = np.linalg.norm(w)
    if n < 1e-9:
        raise DegenerateConfiguration("direction parallel to the world up axis")
    w = w / n
    return np.column_stack([d, w, np.cross(d, w)])


def p2e_zero_roll(correspondences, k: CameraIntrinsics, sweep_step=np.radians(0.1)):
    """Zero-roll pose candidates from two center correspondences.

    With zero roll the solutions form a one-parameter family; the family is
    parameterized by an angle on the ellipse of depth pairs (d1, d2)
    satisfying |d1 b1 - d2 b2| = |P1 - P2|. Each sampled angle gives at
    most two upright rotations (from the elevation equation) and for each
    the position follows from least-squares two-ray triangulation of the
    ellipsoid centers; every candidate reprojects both centers exactly and
    has exactly zero roll.

    Candidates are ordered by sweep index, then elevation-root index.
    """
    correspondences = list(correspondences)
    if len(correspondences) != 2:
        raise ValueError("p2e_zero_roll needs exactly 2 correspondences")
    if not sweep_step > 0:
        raise ValueError("sweep_step must be positive")
    P1 = correspondences[0].ellipsoid.center
    P2 = correspondences[1].ellipsoid.center
    delta = P1 - P2
    L = np.linalg.norm(delta)
    if L < 1e-9:
        raise DegenerateConfiguration("ellipsoid centers coincide")
    b1 = _bearing(k, correspondences[0].ellipse.center)
    b2 = _bearing(k, correspondences[1].ellipse.center)
    g = float(b1 @ b2)
    if 1.0 - g < 1e-12:
        raise DegenerateConfiguration("image centers coincide")
    W = _upright_basis(delta)  # raises if the center line is vertical

    n = int(np.ceil(2.0 * np.pi / sweep_step))
    rho = np.arange(n) * sweep_step
    ka = np.cos(rho) / np.sqrt(2.0 * (1.0 - g))
    kb = np.sin(rho) / np.sqrt(2.0 * (1.0 + g))
    d1 = L * (ka + kb)
    d2 = L * (ka - kb)

    candidates = []
    for i in np.flatnonzero((d1 > 1e-12) & (d2 > 1e-12)):
        m = d1[i] * b1 - d2[i] * b2
        mn = np.linalg.norm(m)
        amp = np.hypot(m[1], m[2])
        if amp < abs(delta[2]) or mn < 1e-12:
            continue  # no real elevation at this sample
        mhat = m / mn
        psi = np.arctan2(-m[1], m[2])
        base = np.arcsin(np.clip(delta[2] / amp, -1.0, 1.0))
        for root, elev in enumerate((base - psi, np.pi - base - psi)):
            elev = (elev + np.pi) % (2.0 * np.pi) - np.pi
            if not -np.pi / 2 <= elev <= np.pi / 2:
                continue  # camera would be upside down
            up_cam = np.array([0.0, -np.cos(elev), np.sin(elev)])
            c2v = up_cam - (up_cam @ mhat) * mhat
            nc = np.linalg.norm(c2v)
            if nc < 1e-9:
                continue
            c2v = c2v / nc
            Cm = np.column_stack([mhat, c2v, np.cross(mhat, c2v)])
            R = Cm @ W.T
            center = 0.5 * ((P1 - d1[i] * (R.T @ b1)) + (P2 - d2[i] * (R.T @ b2)))
            pose = Pose(R, -R @ center)
            candidates.append(PoseCandidate(pose, "p2e", (int(i), root)))
    if not candidates:
        raise NoSolution("sweep produced no valid zero-roll pose")
    return candidates


def conic_residual(correspondence, pose, k: CameraIntrinsics):
    """Upper-triangle residual between observed and projected dual conics.

    Both matrices are normalized to bottom-right -1, off-diagonals are
    weighted sqrt(2) (so the squared norm is the Frobenius discrepancy) and
    the result is divided by the observed Frobenius norm to keep residuals
    O(1) regardless of the pixel scale.
    """
    obs = ellipse_to_dual_conic(correspondence.ellipse).m
    proj = projected_dual_conic(correspondence.ellipsoid, pose, k)
    diff = (proj - obs) / np.linalg.norm(obs)
    w = np.sqrt(2.0)
    return np.array([diff[0, 0], w * diff[0, 1], w * diff[0, 2],
                     diff[1, 1], w * diff[1, 2]])


def _lm_minimize(residual_fn, x0, max_iter=100, step_tol=1e-10):
    """Plain Levenberg-Marquardt with a central-difference Jacobian.

    residual_fn may raise BehindCamera-ish exceptions; those evaluations
    are treated as infinite cost. Returns (x, residual_norm, converged).
    """
    def safe(x):
        try:
            return residual_fn(x)
        except Exception:  # noqa: BLE001 - treated as out-of-domain
            return None

    x = np.asarray(x0, dtype=float).copy()
    r = safe(x)
    if r is None:
        raise NonConvergence("initial point is out of the solver domain")
    cost = float(r @ r)
    lam = 1e-6
    n = x.size
    for _ in range(max_iter):
        J = np.empty((r.size, n))
        ok = True
        for j in range(n):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy(); xp[j] += h
            xm = x.copy(); xm[j] -= h
            rp, rm = safe(xp), safe(xm)
            if rp is None or rm is None:
                ok = False
                break
            J[:, j] = (rp - rm) / (2.0 * h)
        if not ok:
            break
        JtJ = J.T @ J
        g = J.T @ r
        stepped = False
        for _ in range(20):
            try:
                delta = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ)) + 1e-300 * np.eye(n), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = safe(x + delta)
            if r_new is not None and float(r_new @ r_new) < cost:
                x = x + delta
                r = r_new
                cost = float(r_new @ r_new)
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            return x, np.sqrt(cost), True  # stalled at a minimum
        if np.linalg.norm(delta) < step_tol:
            return x, np.sqrt(cost), True
    return x, np.sqrt(cost), False


def position_from_orientation(correspondence, rotation, k: CameraIntrinsics,
                              max_iter=100):
    """Camera position from one correspondence and a known orientation.

    Minimizes the Frobenius discrepancy between the observed and projected
    normalized dual conics over the translation, by damped least squares.
    The initial depth comes from apparent size (focal length times the
    ratio of ellipsoid to ellipse major axis) along the ray through the
    ellipse center. Raises NonConvergence (with the residual) on failure.
    """
    R = np.asarray(rotation, dtype=float)
    e = correspondence.ellipse
    q = correspondence.ellipsoid
    depth0 = 0.5 * (k.fx + k.fy) * q.semi_axes.max() / e.semi_axes[0]
    ray = np.array([(e.center[0] - k.cx) / k.fx, (e.center[1] - k.cy) / k.fy, 1.0])
    t0 = depth0 * ray - R @ q.center

    def residual(t):
        return conic_residual(correspondence, Pose(R, t), k)

    t, res, converged = _lm_minimize(residual, t0, max_iter=max_iter)
    if not converged:
        raise NonConvergence(
            f"position solver did not converge (residual {res:.3g})", residual=res)
    return Pose(R, t)


def refine_pose(pose, correspondences, k: CameraIntrinsics, max_iter=50):
    """Polish a full 6-DoF pose against >= 2 dual-conic observations.

    Local damped least squares over (so(3) increment, translation),
    minimizing the stacked conic_residual of all correspondences. Returns
    the input pose unchanged if the polish fails to improve it.
    """
    correspondences = list(correspondences)
    R0, t0 = pose.rotation, pose.translation

    def residual(x):
        R = R0 @ exp_so3(x[:3])
        p = Pose(R, x[3:])
        return np.concatenate([conic_residual(c, p, k) for c in correspondences])

    x0 = np.concatenate([np.zeros(3), t0])
    try:
        x, _, converged = _lm_minimize(residual, x0, max_iter=max_iter, step_tol=1e-12)
    except NonConvergence:
        return pose
    if not converged:
        return pose
    return Pose(R0 @ exp_so3(x[:3]), x[3:])
