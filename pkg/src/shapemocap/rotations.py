"""Rotation representations: 6D encoding, exp/log maps, quaternions.

All functions broadcast over leading dimensions; matrices are (..., 3, 3),
6D values (..., 6), rotation vectors (..., 3), quaternions (..., 4) in
(w, x, y, z) order.
"""

import numpy as np

_EPS = 1e-12
_DEGENERATE_EPS = 1e-8


class DegenerateRotationError(ValueError):
    """Raised when a 6D value cannot be orthonormalized."""


def rot6d_decode(r):
    """Decode a 6D rotation value to a matrix via Gram-Schmidt.

    The 6D value holds the first two columns of the target matrix.
    Raises DegenerateRotationError if either half is (near) zero or the
    halves are (near) parallel.
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 6:
        raise ValueError(f"expected (..., 6), got {r.shape}")
    a, b = r[..., :3], r[..., 3:]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(na < _DEGENERATE_EPS):
        raise DegenerateRotationError("first 6D half is zero")
    x = a / na
    b_perp = b - np.sum(x * b, axis=-1, keepdims=True) * x
    nb = np.linalg.norm(b_perp, axis=-1, keepdims=True)
    if np.any(nb < _DEGENERATE_EPS):
        raise DegenerateRotationError("6D halves are parallel or second half is zero")
    y = b_perp / nb
    z = np.cross(x, y)
    return np.stack([x, y, z], axis=-1)


def rot6d_encode(R):
    """First two columns of a rotation matrix, flattened to (..., 6)."""
    R = np.asarray(R, dtype=float)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def exp_so3(w):
    """Rodrigues formula: rotation vector -> matrix."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1, keepdims=True)
    small = theta[..., 0] < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        axis = np.where(theta > _EPS, w / theta, 0.0)
    K = _hat(axis)
    s = np.sin(theta)[..., None]
    c = np.cos(theta)[..., None]
    eye = np.broadcast_to(np.eye(3), K.shape)
    R = eye + s * K + (1.0 - c) * (K @ K)
    if np.any(small):
        # first-order expansion is exact enough below 1e-8
        R_small = eye + _hat(w)
        R = np.where(small[..., None, None], R_small, R)
    return R


def log_so3(R):
    """Matrix -> rotation vector (angle in [0, pi])."""
    R = np.asarray(R, dtype=float)
    tr = np.clip((np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(tr)
    v = np.stack([R[..., 2, 1] - R[..., 1, 2],
                  R[..., 0, 2] - R[..., 2, 0],
                  R[..., 1, 0] - R[..., 0, 1]], axis=-1)
    sin_t = np.sin(theta)
    out = np.empty_like(v)
    small = theta < 1e-7
    near_pi = theta > np.pi - 1e-5
    regular = ~(small | near_pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(sin_t > _EPS, theta / (2.0 * sin_t), 0.5)
    out[...] = v * scale[..., None]
    if np.any(near_pi):
        # axis from the symmetric part: R ~ 2 a a^T - I at theta = pi
        A = (R + np.swapaxes(R, -1, -2)) / 2.0
        diag = np.stack([A[..., 0, 0], A[..., 1, 1], A[..., 2, 2]], axis=-1)
        axis = np.sqrt(np.clip((diag + 1.0) / 2.0, 0.0, None))
        # fix signs using the largest component
        k = np.argmax(axis, axis=-1)
        idx = np.indices(k.shape)
        sign = np.ones_like(axis)
        for j in range(3):
            off = A[(*idx, k, np.full_like(k, j))]
            sj = np.where(off < 0.0, -1.0, 1.0)
            sign[..., j] = np.where(j == k, 1.0, sj)
        axis = axis * sign
        n = np.linalg.norm(axis, axis=-1, keepdims=True)
        axis = axis / np.where(n > _EPS, n, 1.0)
        out = np.where(near_pi[..., None], axis * theta[..., None], out)
    return out


def _hat(v):
    v = np.asarray(v, dtype=float)
    z = np.zeros(v.shape[:-1])
    return np.stack([
        np.stack([z, -v[..., 2], v[..., 1]], axis=-1),
        np.stack([v[..., 2], z, -v[..., 0]], axis=-1),
        np.stack([-v[..., 1], v[..., 0], z], axis=-1),
    ], axis=-2)


hat = _hat


def geodesic_angle(Ra, Rb):
    """Angle (radians) of the relative rotation Ra^T Rb."""
    Ra = np.asarray(Ra, dtype=float)
    Rb = np.asarray(Rb, dtype=float)
    M = np.swapaxes(Ra, -1, -2) @ Rb
    tr = np.clip((np.trace(M, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    return np.arccos(tr)


def quat_to_matrix(q):
    """(w, x, y, z) quaternion -> rotation matrix; input is normalized."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < _EPS):
        raise ValueError("zero quaternion")
    w, x, y, z = np.moveaxis(q / n, -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
    ], axis=-2)


def matrix_to_quat(R):
    """Rotation matrix -> (w, x, y, z) quaternion with w >= 0."""
    R = np.asarray(R, dtype=float)
    flat = R.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 4))
    for i, M in enumerate(flat):
        t = np.trace(M)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2
            q = np.array([0.25 * s,
                          (M[2, 1] - M[1, 2]) / s,
                          (M[0, 2] - M[2, 0]) / s,
                          (M[1, 0] - M[0, 1]) / s])
        else:
            k = int(np.argmax(np.diag(M)))
            i1, i2 = (k + 1) % 3, (k + 2) % 3
            s = np.sqrt(1.0 + M[k, k] - M[i1, i1] - M[i2, i2]) * 2
            q = np.empty(4)
            q[0] = (M[i2, i1] - M[i1, i2]) / s
            q[1 + k] = 0.25 * s
            q[1 + i1] = (M[i1, k] + M[k, i1]) / s
            q[1 + i2] = (M[i2, k] + M[k, i2]) / s
        if q[0] < 0:
            q = -q
        out[i] = q
    return out.reshape(R.shape[:-2] + (4,))


def random_rotations(n, rng):
    """n uniformly distributed rotation matrices (quaternion method)."""
    q = rng.normal(size=(n, 4))
    return quat_to_matrix(q)


def rotation_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return exp_so3(axis * angle)
