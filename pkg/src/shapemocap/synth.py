"""Shape-conditioned IMU synthesis and paired multi-shape data generation.

Covers shape augmentation, foot-contact stationarity detection, root
translation retargeting between bodies, virtual IMU synthesis, joint
velocities, and paired (real-shape, template-shape) samples.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import config
from .body import (BodyModel, ShapeParams, build_body, foot_vertices,
                   forward_kinematics_batch, mount_transforms_batch,
                   skin_vertices_batch)
from .motions import MotionSequence
from .rotations import log_so3, rot6d_decode

_GRAVITY = np.asarray(config.GRAVITY)


@dataclass(frozen=True)
class ImuFrame:
    acceleration: np.ndarray      # (6, 3) m/s^2, world frame, gravity included
    angular_velocity: np.ndarray  # (6, 3) rad/s, sensor frame
    orientation: np.ndarray       # (6, 3, 3) sensor-to-world


@dataclass(frozen=True)
class ImuSequence:
    acceleration: np.ndarray      # (N, 6, 3)
    angular_velocity: np.ndarray  # (N, 6, 3)
    orientation: np.ndarray       # (N, 6, 3, 3)
    rate: float = config.FRAME_RATE

    def __post_init__(self):
        acc = np.asarray(self.acceleration, dtype=float)
        gyr = np.asarray(self.angular_velocity, dtype=float)
        ori = np.asarray(self.orientation, dtype=float)
        n = acc.shape[0]
        if n < 2:
            raise ValueError("ImuSequence needs at least 2 frames")
        if acc.shape != (n, 6, 3) or gyr.shape != (n, 6, 3) or ori.shape != (n, 6, 3, 3):
            raise ValueError("inconsistent IMU stream shapes")
        if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(gyr)) and np.all(np.isfinite(ori))):
            raise ValueError("non-finite IMU values")
        err = ori @ np.swapaxes(ori, -1, -2) - np.eye(3)
        if np.abs(err).max() > 1e-5:
            raise ValueError("orientations are not orthonormal")
        object.__setattr__(self, "acceleration", acc)
        object.__setattr__(self, "angular_velocity", gyr)
        object.__setattr__(self, "orientation", ori)

    def __len__(self):
        return self.acceleration.shape[0]

    def frame(self, i):
        return ImuFrame(self.acceleration[i], self.angular_velocity[i],
                        self.orientation[i])


@dataclass(frozen=True)
class PairedSample:
    """One pose sequence rendered on a real-shape and the template body."""

    shape: ShapeParams
    motion_template: MotionSequence
    motion_real: MotionSequence
    imu_template: ImuSequence
    imu_real: ImuSequence
    vel_template: np.ndarray  # (N, 24, 3) m/s
    vel_real: np.ndarray
    contacts: np.ndarray      # (N, 2) left/right foot ground-truth contact

    @property
    def acc_template(self):
        return self.imu_template.acceleration

    @property
    def acc_real(self):
        return self.imu_real.acceleration

    def __len__(self):
        return len(self.motion_template)


def augment_shape(base, scale):
    """Multiply height_scale by scale in [0.5, 1.2]; beta is preserved."""
    if not (config.AUGMENT_SCALE_MIN <= scale <= config.AUGMENT_SCALE_MAX):
        raise ValueError(f"augmentation scale {scale} outside "
                         f"[{config.AUGMENT_SCALE_MIN}, {config.AUGMENT_SCALE_MAX}]")
    return ShapeParams(beta=base.beta.copy(),
                       height_scale=base.height_scale * scale)


def detect_stationary(foot_positions):
    """Stationarity flags from per-frame world foot vertex positions.

    foot_positions: (N, 4, 3).  Returns (N-1, 4) booleans: entry [i-1, k]
    is True iff vertex k moved strictly less than 0.5 cm from frame i-1 to
    frame i.
    """
    foot_positions = np.asarray(foot_positions, dtype=float)
    if foot_positions.ndim != 3 or foot_positions.shape[0] < 2:
        raise ValueError("need (N>=2, 4, 3) foot positions")
    disp = np.linalg.norm(np.diff(foot_positions, axis=0), axis=-1)
    return disp < config.STATIONARY_THRESHOLD_M


def _foot_world_positions(body, motion):
    mats = rot6d_decode(motion.rotations)
    R, p = forward_kinematics_batch(body, mats, motion.translation)
    return skin_vertices_batch(body, R, p, indices=foot_vertices(body))


def _pose_only_foot_positions(body, rotations):
    mats = rot6d_decode(rotations)
    R, p = forward_kinematics_batch(body, mats, np.zeros((len(mats), 3)))
    return skin_vertices_batch(body, R, p, indices=foot_vertices(body))


def retarget_translation(template_motion, template_body, target_body):
    """Recompute the root translation of a motion on a different body.

    Frame 0 copies x/z from the template and drops the body so its lowest
    foot vertex touches the ground.  Wherever the template motion has a
    stationary foot vertex (ties broken by smallest displacement) the
    target increment keeps that vertex's world position fixed; airborne
    frames copy the template's world-frame increment.  The pose sequence is
    returned unchanged.
    """
    fv_template = _foot_world_positions(template_body, template_motion)
    stationary = detect_stationary(fv_template)
    disp = np.linalg.norm(np.diff(fv_template, axis=0), axis=-1)

    fv = _pose_only_foot_positions(target_body, template_motion.rotations)
    n = len(fv)
    tran = np.zeros((n, 3))
    t0 = template_motion.translation[0]
    tran[0] = [t0[0], -fv[0, :, 1].min(), t0[2]]
    template_inc = np.diff(template_motion.translation, axis=0)
    for i in range(1, n):
        row = stationary[i - 1]
        if row.any():
            k = int(np.flatnonzero(row)[np.argmin(disp[i - 1][row])])
            tran[i] = tran[i - 1] + (fv[i - 1, k] - fv[i, k])
        else:
            tran[i] = tran[i - 1] + template_inc[i - 1]
    return MotionSequence(rotations=template_motion.rotations,
                          translation=tran, rate=template_motion.rate)


def synth_imu(motion, body, smooth_sigma=1.0):
    """Virtual IMU streams for the 6 mounts of a body following a motion.

    Orientation is the bone world rotation composed with the mount's local
    orientation.  Angular velocity is the log map of the frame-to-frame
    relative rotation times the rate, in the sensor frame.  Acceleration is
    the central second difference of the mount world position, smoothed
    with a Gaussian (sigma in frames), minus gravity, in the world frame.
    """
    n = len(motion)
    if n < 5:
        raise ValueError(f"need at least 5 frames to synthesize IMU, got {n}")
    rate = motion.rate
    mats = rot6d_decode(motion.rotations)
    R, p = forward_kinematics_batch(body, mats, motion.translation)
    Rm, pm = mount_transforms_batch(body, R, p)

    rel = np.swapaxes(Rm[:-1], -1, -2) @ Rm[1:]
    gyro = np.empty((n, 6, 3))
    gyro[:-1] = log_so3(rel) * rate
    gyro[-1] = gyro[-2]

    acc = np.empty((n, 6, 3))
    acc[1:-1] = (pm[2:] - 2.0 * pm[1:-1] + pm[:-2]) * rate * rate
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    if smooth_sigma > 0.0:
        acc = gaussian_filter1d(acc, sigma=smooth_sigma, axis=0, mode="nearest")
    acc = acc - _GRAVITY
    return ImuSequence(acceleration=acc, angular_velocity=gyro, orientation=Rm,
                       rate=rate)


def joint_velocities(motion, body):
    """World joint velocities: central difference * rate, one-sided ends."""
    n = len(motion)
    if n < 2:
        raise ValueError("need at least 2 frames")
    mats = rot6d_decode(motion.rotations)
    _, p = forward_kinematics_batch(body, mats, motion.translation)
    v = np.empty_like(p)
    v[1:-1] = (p[2:] - p[:-2]) * (motion.rate / 2.0)
    v[0] = (p[1] - p[0]) * motion.rate
    v[-1] = (p[-1] - p[-2]) * motion.rate
    return v


def foot_contact_labels(body, motion):
    """(N, 2) left/right foot contact: any of the foot's two vertices
    stationary; frame 0 copies frame 1."""
    fv = _foot_world_positions(body, motion)
    flags = detect_stationary(fv)  # (N-1, 4): l_toe, l_heel, r_toe, r_heel
    out = np.zeros((len(fv), 2), dtype=bool)
    out[1:, 0] = flags[:, 0] | flags[:, 1]
    out[1:, 1] = flags[:, 2] | flags[:, 3]
    out[0] = out[1]
    return out


def make_pairs(motion, shape, template_body):
    """Build a PairedSample: retarget translation to the shaped body and
    synthesize IMU + joint velocities on both bodies."""
    target_body = build_body(shape)
    motion_real = retarget_translation(motion, template_body, target_body)
    return PairedSample(
        shape=shape,
        motion_template=motion,
        motion_real=motion_real,
        imu_template=synth_imu(motion, template_body),
        imu_real=synth_imu(motion_real, target_body),
        vel_template=joint_velocities(motion, template_body),
        vel_real=joint_velocities(motion_real, target_body),
        contacts=foot_contact_labels(template_body, motion),
    )
