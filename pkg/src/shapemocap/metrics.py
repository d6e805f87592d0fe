"""Motion evaluation metrics and the translation drift curve.

Positional metrics are root-aligned per frame (the prediction's root is
translated onto the ground truth's); rotation metrics compare global joint
rotations as-is; the drift curve uses absolute trajectories.  Joint and
mesh errors are centimeters, jitter is 10^3 m/s^3.
"""

from dataclasses import dataclass

import numpy as np

from .body import SIP_JOINTS, build_body, forward_kinematics_batch, skin_vertices_batch
from .motions import MotionSequence
from .rotations import geodesic_angle, rot6d_decode


@dataclass(frozen=True)
class MotionComparison:
    predicted: MotionSequence
    truth: MotionSequence
    predicted_body: object
    truth_body: object

    def __post_init__(self):
        if len(self.predicted) != len(self.truth):
            raise ValueError("motion lengths differ")
        if self.predicted.rate != self.truth.rate:
            raise ValueError("frame rates differ")


def _fk(motion, body):
    mats = rot6d_decode(motion.rotations)
    return forward_kinematics_batch(body, mats, motion.translation)


def sip_error(cmp):
    """Mean geodesic angle (degrees) over shoulders and hips."""
    return _mean_joint_angle(cmp, SIP_JOINTS)


def angular_error(cmp):
    """Mean geodesic angle (degrees) over all 24 joints."""
    return _mean_joint_angle(cmp, slice(None))


def _mean_joint_angle(cmp, joints):
    Rp, _ = _fk(cmp.predicted, cmp.predicted_body)
    Rt, _ = _fk(cmp.truth, cmp.truth_body)
    ang = geodesic_angle(Rp[:, joints], Rt[:, joints])
    return float(np.degrees(ang.mean()))


def joint_position_error(cmp):
    """Mean joint distance (cm) after per-frame root alignment."""
    _, pp = _fk(cmp.predicted, cmp.predicted_body)
    _, pt = _fk(cmp.truth, cmp.truth_body)
    pp = pp - pp[:, :1]
    pt = pt - pt[:, :1]
    return float(np.linalg.norm(pp - pt, axis=-1).mean() * 100.0)


def mesh_error(cmp):
    """Mean vertex distance (cm) after per-frame root alignment."""
    vp = _posed_vertices(cmp.predicted, cmp.predicted_body)
    vt = _posed_vertices(cmp.truth, cmp.truth_body)
    if vp.shape != vt.shape:
        raise ValueError("vertex counts differ between the two bodies")
    return float(np.linalg.norm(vp - vt, axis=-1).mean() * 100.0)


def _posed_vertices(motion, body):
    R, p = _fk(motion, body)
    v = skin_vertices_batch(body, R, p)
    return v - p[:, :1]


def jitter(motion, body):
    """Mean norm of the third finite difference of joint positions times
    rate^3, in 10^3 m/s^3."""
    if len(motion) < 4:
        raise ValueError("need at least 4 frames for jitter")
    _, p = _fk(motion, body)
    jerk = (p[3:] - 3.0 * p[2:-1] + 3.0 * p[1:-2] - p[:-3]) * motion.rate ** 3
    return float(np.linalg.norm(jerk, axis=-1).mean() / 1e3)


def mesh_error_tpose(shape_pred, shape_true):
    """Mean vertex distance (cm) between the two shapes' T-pose meshes."""
    va = build_body(shape_pred).vertices_rest
    vb = build_body(shape_true).vertices_rest
    return float(np.linalg.norm(va - vb, axis=-1).mean() * 100.0)


def drift_curve(cmp):
    """(traveled ground-truth distance m, root position error m) per frame."""
    steps = np.linalg.norm(np.diff(cmp.truth.translation, axis=0), axis=-1)
    distance = np.concatenate([[0.0], np.cumsum(steps)])
    error = np.linalg.norm(cmp.predicted.translation - cmp.truth.translation,
                           axis=-1)
    return np.stack([distance, error], axis=1)


def evaluate(cmp):
    """All six metrics as a dict (units per Table conventions)."""
    return {
        "sip_deg": sip_error(cmp),
        "angular_deg": angular_error(cmp),
        "joint_cm": joint_position_error(cmp),
        "mesh_cm": mesh_error(cmp),
        "jitter_km_s3": jitter(cmp.predicted, cmp.predicted_body),
        "mesh_tpose_cm": mesh_error_tpose(cmp.predicted_body.shape,
                                          cmp.truth_body.shape),
    }
