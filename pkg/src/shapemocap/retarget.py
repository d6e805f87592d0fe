"""Kinematic signal retargeting networks.

R_acc maps real-shape accelerations (plus shape parameters) to the
template body's accelerations; R_vel maps template joint velocities back
to the real shape.  Shape parameters are concatenated to every input
frame.  Velocities are handled in the root (waist) frame.
"""

import numpy as np

from .body import NUM_JOINTS
from .features import ACC_BLOCK, acc_block, preprocess_imu
from .nets import RegressorStream, train_regressor
from .rotations import rot6d_decode

SHAPE_DIM = 11
RACC_INPUT = ACC_BLOCK + SHAPE_DIM          # 29
RACC_OUTPUT = ACC_BLOCK                     # 18
RVEL_INPUT = NUM_JOINTS * 3 + SHAPE_DIM     # 83
RVEL_OUTPUT = NUM_JOINTS * 3                # 72


def _with_shape(rows, shape):
    vec = shape.as_vector()
    return np.concatenate([rows, np.tile(vec, (len(rows), 1))], axis=1)


def racc_infer(model, acc_features, shape):
    """Batch R_acc inference: (N, 18) real acc features -> template's."""
    if model.input_dim != RACC_INPUT or model.output_dim != RACC_OUTPUT:
        raise ValueError("model dimensions do not match the R_acc contract")
    return model.run_numpy(_with_shape(np.atleast_2d(acc_features), shape))


def rvel_infer(model, velocities, shape):
    """Batch R_vel inference: (N, 24, 3) template root-frame velocities ->
    real-shape velocities."""
    if model.input_dim != RVEL_INPUT or model.output_dim != RVEL_OUTPUT:
        raise ValueError("model dimensions do not match the R_vel contract")
    v = np.asarray(velocities, float).reshape(-1, RVEL_OUTPUT)
    out = model.run_numpy(_with_shape(v, shape))
    return out.reshape(-1, NUM_JOINTS, 3)


def racc_stream(model):
    if model.input_dim != RACC_INPUT:
        raise ValueError("model dimensions do not match the R_acc contract")
    return RegressorStream(model)


def rvel_stream(model):
    if model.input_dim != RVEL_INPUT:
        raise ValueError("model dimensions do not match the R_vel contract")
    return RegressorStream(model)


def root_frame_velocities(motion_rotations, velocities):
    """Rotate world joint velocities into the per-frame root bone frame."""
    R0 = rot6d_decode(motion_rotations[:, 0])
    return np.einsum("nab,njb->nja", np.swapaxes(R0, -1, -2), velocities)


def world_frame_velocities(root_R, velocities_root):
    return np.einsum("nab,njb->nja", root_R, velocities_root)


def build_racc_dataset(pairs):
    """[(X, Y)] with X = real acc features + shape, Y = template features."""
    out = []
    for p in pairs:
        xr = acc_block(preprocess_imu(p.imu_real))
        yt = acc_block(preprocess_imu(p.imu_template))
        out.append((_with_shape(xr, p.shape), yt))
    return out


def build_rvel_dataset(pairs):
    """[(X, Y)] with X = template root-frame velocities + shape."""
    out = []
    for p in pairs:
        vt = root_frame_velocities(p.motion_template.rotations, p.vel_template)
        vr = root_frame_velocities(p.motion_real.rotations, p.vel_real)
        out.append((_with_shape(vt.reshape(len(vt), -1), p.shape),
                    vr.reshape(len(vr), -1)))
    return out


def train_racc(pairs, cfg):
    return train_regressor(build_racc_dataset(pairs), cfg,
                           input_dim=RACC_INPUT, output_dim=RACC_OUTPUT)


def train_rvel(pairs, cfg):
    return train_regressor(build_rvel_dataset(pairs), cfg,
                           input_dim=RVEL_INPUT, output_dim=RVEL_OUTPUT)


def acceleration_gap(pairs, model=None):
    """Mean acceleration discrepancy to the template, in feature units.

    With model=None this is the identity-passthrough baseline
    mean ||A_R - A_T||; with a model it is mean ||R_acc(A_R) - A_T||.
    """
    total, count = 0.0, 0
    for p in pairs:
        xr = acc_block(preprocess_imu(p.imu_real))
        yt = acc_block(preprocess_imu(p.imu_template))
        pred = xr if model is None else racc_infer(model, xr, p.shape)
        total += np.linalg.norm(pred - yt, axis=1).sum()
        count += len(xr)
    return total / count
