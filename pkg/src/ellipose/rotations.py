"""Small rotation-matrix toolbox (NumPy only).

Rotations are 3x3 orthonormal matrices with determinant +1. Quaternions
use (w, x, y, z) ordering and are normalized on conversion.
"""

import numpy as np


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def from_euler_xyz(ax, ay, az):
    """Compose R = Rz(az) @ Ry(ay) @ Rx(ax)."""
    return rot_z(az) @ rot_y(ay) @ rot_x(ax)


def axis_angle(axis, angle):
    """Rodrigues rotation about ``axis`` (need not be unit) by ``angle`` radians."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.eye(3)
    x, y, z = axis / n
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def exp_so3(w):
    """Matrix exponential of the skew form of a 3-vector."""
    w = np.asarray(w, dtype=float)
    angle = np.linalg.norm(w)
    if angle < 1e-300:
        return np.eye(3)
    return axis_angle(w, angle)


def random_rotation(rng):
    """Uniform random rotation (via a normalized Gaussian quaternion)."""
    q = rng.normal(size=4)
    return quat_to_matrix(q)


def quat_to_matrix(q):
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(R[i, i] - R[j, j] - R[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def geodesic_angle_deg(Ra, Rb):
    """Geodesic distance between two rotations, in degrees.

    Equals arccos((trace(Ra Rb^T) - 1) / 2); small angles are evaluated
    through ||Ra - Rb||_F = 2 sqrt(2) sin(angle / 2), which does not lose
    precision to the arccos plateau near zero.
    """
    Ra, Rb = np.asarray(Ra), np.asarray(Rb)
    fro = np.linalg.norm(Ra - Rb)
    if fro < 2.0:  # angle below pi/2: asin form is exact and well conditioned
        angle = 2.0 * np.arcsin(np.clip(fro / (2.0 * np.sqrt(2.0)), 0.0, 1.0))
    else:
        c = (np.trace(Ra @ Rb.T) - 1.0) / 2.0
        angle = np.arccos(np.clip(c, -1.0, 1.0))
    return float(np.degrees(angle))


def is_rotation(R, tol=1e-10):
    R = np.asarray(R)
    if R.shape != (3, 3):
        return False
    return (np.abs(R @ R.T - np.eye(3)).max() <= tol
            and np.linalg.det(R) > 0.0)


def orthonormalize(R):
    """Nearest rotation matrix in the Frobenius sense (SVD projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt
