"""Inertial shape estimation and the streaming shape-pose refinement loop.

The shape estimator is an MLP over fixed-length window statistics: per
sensor mean/std of the gravity-free root-relative accelerations, the mean
6D joint rotations, and the height scale.  The refinement loop estimates
pose per frame conditioned on the current shape and updates the shape at
every full window (frames 60, 120, ...).
"""

from dataclasses import dataclass

import numpy as np

from . import config
from .body import NUM_JOINTS, ShapeParams
from .features import ACC_BLOCK, acc_block, preprocess_imu, root_orientation
from .motions import MotionSequence
from .nets import train_mlp
from .posenet import PoseEstimator
from .retarget import racc_stream, rvel_infer
from .rotations import rot6d_decode

WINDOW = config.SHAPE_WINDOW

# mean+std of the 18 acceleration features, mean of 24x6 rotation values,
# plus the height scale
SHAPE_FEATURE_DIM = 2 * ACC_BLOCK + NUM_JOINTS * 6 + 1  # 181
_SCALE_MIN, _SCALE_MAX = 0.31, 2.49


@dataclass(frozen=True)
class ShapeWindow:
    acc_features: np.ndarray  # (60, 18) real-shape acceleration features
    theta: np.ndarray         # (60, 24, 6) estimated pose
    scale: float              # subject height / template height

    def __post_init__(self):
        acc = np.asarray(self.acc_features, float)
        th = np.asarray(self.theta, float)
        if acc.shape != (WINDOW, ACC_BLOCK) or th.shape != (WINDOW, NUM_JOINTS, 6):
            raise ValueError(
                f"shape window needs exactly {WINDOW} frames, got "
                f"acc {acc.shape}, theta {th.shape}")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "acc_features", acc)
        object.__setattr__(self, "theta", th)


def window_features(window):
    """(181,) statistics vector for the shape MLP."""
    acc = window.acc_features
    th = window.theta.reshape(WINDOW, -1)
    return np.concatenate([acc.mean(axis=0), acc.std(axis=0),
                           th.mean(axis=0), [window.scale]])


def init_shape(subject_height, template_height, beta0=None):
    """Initial shape: scale the height by subject/template height ratio."""
    if subject_height <= 0.0 or template_height <= 0.0:
        raise ValueError("heights must be positive")
    if beta0 is None:
        beta0 = ShapeParams()
    return ShapeParams(beta=beta0.beta.copy(),
                       height_scale=beta0.height_scale
                       * subject_height / template_height)


def estimate_shape(window, mlp):
    """Predict shape parameters from one full window."""
    feats = window_features(window)
    if mlp.input_dim != len(feats):
        raise ValueError("shape MLP input dimension mismatch")
    vec = mlp.run_numpy(feats[None])[0].astype(float)
    vec[10] = np.clip(vec[10], _SCALE_MIN, _SCALE_MAX)
    return ShapeParams.from_vector(vec)


def shape_windows_from_pair(pair, theta=None):
    """All full windows of a paired sample (ground-truth pose by default)."""
    acc = acc_block(preprocess_imu(pair.imu_real))
    th = pair.motion_template.rotations if theta is None else theta
    scale = pair.shape.height_scale
    out = []
    for s in range(0, len(acc) - WINDOW + 1, WINDOW):
        out.append(ShapeWindow(acc[s:s + WINDOW], th[s:s + WINDOW], scale))
    return out


def train_shape_mlp(pairs, cfg, hidden_dim=None):
    """Fit the MLP on window statistics -> true shape vectors."""
    X, Y = [], []
    for p in pairs:
        for w in shape_windows_from_pair(p):
            X.append(window_features(w))
            Y.append(p.shape.as_vector())
    if not X:
        raise ValueError("no full windows in the corpus")
    return train_mlp(np.array(X), np.array(Y), cfg,
                     hidden_dim=hidden_dim or cfg.hidden_dim)


@dataclass
class TrackModels:
    racc: object
    rvel: object
    stages: object
    shape_mlp: object


@dataclass
class TrackResult:
    motion: MotionSequence
    beta_trace: list              # [(frame index, ShapeParams), ...]
    contacts: np.ndarray          # (N, 2)
    velocities: np.ndarray        # (N, 24, 3) world frame, real shape
    shapes_per_frame: list        # ShapeParams active at each frame


def refine_loop(imu, subject_height, models, template_height=None,
                update_shape=True, use_racc=True):
    """Streaming pose estimation with windowed shape refinement.

    Per frame: retarget the acceleration features to the template with
    R_acc (conditioned on the current shape), run the staged pose
    estimator, and map joint velocities back with R_vel.  Every 60 frames
    the shape MLP re-estimates the shape from the window's accelerations
    and estimated poses.  Returns the motion, the per-window shape trace,
    and per-frame diagnostics.
    """
    if template_height is None:
        template_height = config.TEMPLATE_HEIGHT_M
    feats_raw = preprocess_imu(imu)
    root_R = root_orientation(imu)
    n = len(feats_raw)
    shape = init_shape(subject_height, template_height)
    scale = subject_height / template_height

    racc = racc_stream(models.racc) if use_racc else None
    estimator = PoseEstimator(models.stages)
    theta = np.empty((n, NUM_JOINTS, 6))
    vel_root = np.empty((n, NUM_JOINTS, 3))
    contacts = np.empty((n, 2))
    shapes = []
    trace = []
    for t in range(n):
        feat = feats_raw[t]
        if racc is not None:
            retargeted = racc.step(np.concatenate([feat[:ACC_BLOCK],
                                                   shape.as_vector()]))
            feat = feat.copy()
            feat[:ACC_BLOCK] = retargeted
        est = estimator.step(feat, root_R[t])
        theta[t] = est.theta
        vel_root[t] = (root_R[t].T @ est.velocities.T).T
        contacts[t] = est.contact_prob
        shapes.append(shape)
        if update_shape and (t + 1) % WINDOW == 0:
            window = ShapeWindow(acc_block(feats_raw[t + 1 - WINDOW:t + 1]),
                                 theta[t + 1 - WINDOW:t + 1], scale)
            shape = estimate_shape(window, models.shape_mlp)
            trace.append((t + 1, shape))

    # map velocities back to the real shape and integrate the root
    vel_real_root = np.empty_like(vel_root)
    for t in range(n):
        vel_real_root[t] = rvel_infer(models.rvel, vel_root[t:t + 1],
                                      shapes[t])[0]
    vel_world = np.einsum("nab,njb->nja", root_R, vel_real_root)
    tran = np.zeros((n, 3))
    for t in range(1, n):
        tran[t] = tran[t - 1] + vel_world[t, 0] / imu.rate
    motion = MotionSequence(rotations=theta, translation=tran, rate=imu.rate)
    return TrackResult(motion=motion, beta_trace=trace, contacts=contacts,
                       velocities=vel_world, shapes_per_frame=shapes)
