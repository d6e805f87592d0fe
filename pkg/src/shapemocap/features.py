"""IMU feature preprocessing shared by the retargeting and pose networks.

Features are waist-relative: every sensor orientation and gravity-free
acceleration is expressed in the waist (root) sensor frame, which makes
them invariant to the heading of the capture.  Per frame the layout is

    [acc_rel (6*3) / ACC_SCALE, gyro (6*3) / GYRO_SCALE, ori_rel (6*9)]

for a total of 90 values; the acceleration block sits first so the
acceleration retargeting network can replace it in place.
"""

import numpy as np

from . import config

GRAVITY_READING = np.array([0.0, 9.81, 0.0])
ACC_SCALE = 9.81
GYRO_SCALE = 10.0
ACC_BLOCK = 18
FEATURE_DIM = 6 * 3 + 6 * 3 + 6 * 9  # 90

_ROOT = config.ROOT_SENSOR


def _check_orientations(ori):
    err = ori @ np.swapaxes(ori, -1, -2) - np.eye(3)
    if np.abs(err).max() > 1e-5:
        raise ValueError("sensor orientation is not orthonormal")


def preprocess_arrays(acc, gyro, ori):
    """(N, 6, 3/3/3x3) arrays -> (N, 90) features."""
    acc = np.asarray(acc, float)
    gyro = np.asarray(gyro, float)
    ori = np.asarray(ori, float)
    if acc.ndim == 2:
        acc, gyro, ori = acc[None], gyro[None], ori[None]
    _check_orientations(ori)
    root = ori[:, _ROOT]
    root_inv = np.swapaxes(root, -1, -2)
    acc_free = acc - GRAVITY_READING
    acc_rel = np.einsum("nab,nsb->nsa", root_inv, acc_free) / ACC_SCALE
    ori_rel = np.einsum("nab,nsbc->nsac", root_inv, ori)
    n = acc.shape[0]
    return np.concatenate([acc_rel.reshape(n, -1),
                           gyro.reshape(n, -1) / GYRO_SCALE,
                           ori_rel.reshape(n, -1)], axis=1)


def preprocess_imu(imu):
    """ImuSequence -> (N, 90) feature matrix."""
    return preprocess_arrays(imu.acceleration, imu.angular_velocity,
                             imu.orientation)


def acc_block(features):
    """The root-relative gravity-free acceleration block, (N, 18)."""
    return features[..., :ACC_BLOCK]


def replace_acc_block(features, new_block):
    out = np.array(features, copy=True)
    out[..., :ACC_BLOCK] = new_block
    return out


def root_orientation(imu):
    """Waist sensor orientation stream (N, 3, 3)."""
    return imu.orientation[:, _ROOT]
