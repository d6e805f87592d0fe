import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from shapemocap.rotations import (DegenerateRotationError, exp_so3,
                                  geodesic_angle, log_so3, matrix_to_quat,
                                  quat_to_matrix, random_rotations,
                                  rot6d_decode, rot6d_encode, rotation_about)


def gram_schmidt_oracle(a, b):
    """Independent Gram-Schmidt of two 3-vectors into a rotation matrix."""
    x = a / np.linalg.norm(a)
    y = b - np.dot(x, b) * x
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    return np.column_stack([x, y, z])


def test_rot6d_identity():
    R = rot6d_decode([1, 0, 0, 0, 1, 0])
    assert np.array_equal(R, np.eye(3))


def test_rot6d_axis_aligned_90deg():
    R = rot6d_decode([0, 1, 0, -1, 0, 0])
    expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
    assert np.allclose(R, expected, atol=1e-15)


def test_rot6d_matches_gram_schmidt_oracle():
    a = np.array([1.0, 0.1, 0.0])
    b = np.array([0.0, 1.0, 0.0])
    R = rot6d_decode(np.concatenate([a, b]))
    assert np.abs(R - gram_schmidt_oracle(a, b)).max() < 1e-12


def test_rot6d_degenerate_inputs():
    with pytest.raises(DegenerateRotationError):
        rot6d_decode([0, 0, 0, 0, 1, 0])
    with pytest.raises(DegenerateRotationError):
        rot6d_decode([1, 0, 0, 2, 0, 0])


def test_rot6d_round_trip_1000_random():
    rng = np.random.default_rng(7)
    R = random_rotations(1000, rng)
    back = rot6d_decode(rot6d_encode(R))
    err = np.linalg.norm((back - R).reshape(1000, -1), axis=1)
    assert err.max() < 1e-10


def test_decoded_matrices_are_proper():
    rng = np.random.default_rng(3)
    r6 = rng.normal(size=(200, 6))
    R = rot6d_decode(r6)
    assert np.allclose(R @ np.swapaxes(R, -1, -2), np.eye(3), atol=1e-12)
    assert np.allclose(np.linalg.det(R), 1.0, atol=1e-12)


def test_exp_log_round_trip_against_scipy():
    rng = np.random.default_rng(11)
    w = rng.normal(size=(500, 3))
    R = exp_so3(w)
    assert np.allclose(R, Rotation.from_rotvec(w).as_matrix(), atol=1e-12)
    R2 = Rotation.random(500, rng=np.random.default_rng(12)).as_matrix()
    assert np.allclose(exp_so3(log_so3(R2)), R2, atol=1e-9)


def test_log_near_pi():
    R = rotation_about([0, 1, 0], np.pi - 1e-9)
    w = log_so3(R)
    assert np.allclose(exp_so3(w), R, atol=1e-6)


def test_quaternion_round_trip():
    rng = np.random.default_rng(5)
    R = random_rotations(300, rng)
    assert np.allclose(quat_to_matrix(matrix_to_quat(R)), R, atol=1e-12)


def test_geodesic_angle():
    Ra = rotation_about([0, 0, 1], 0.3)
    Rb = rotation_about([0, 0, 1], 0.8)
    assert abs(geodesic_angle(Ra, Rb) - 0.5) < 1e-12
    assert abs(geodesic_angle(Rb, Ra) - 0.5) < 1e-12
