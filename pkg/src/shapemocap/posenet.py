"""Template-shape motion estimator.

Three stages run sequentially per frame (leaf joint positions, full joint
positions, joint rotations) with two parallel heads (joint velocities and
foot contact probabilities).  All stages consume the waist-relative IMU
features; positions and velocities are expressed in the root bone frame,
and the root orientation itself comes from the waist sensor.
"""

import os
from dataclasses import dataclass

import numpy as np

from .body import LEAF_JOINTS, NUM_JOINTS, forward_kinematics_batch
from .features import FEATURE_DIM, preprocess_imu, root_orientation
from .nets import (RegressorStream, load_model, save_model, train_regressor)
from .retarget import root_frame_velocities
from .rotations import rot6d_decode, rot6d_encode
from .synth import foot_contact_labels, joint_velocities

LEAF_DIM = len(LEAF_JOINTS) * 3          # 15
JOINT_DIM = NUM_JOINTS * 3               # 72
ROT_DIM = (NUM_JOINTS - 1) * 6           # 138, root comes from the sensor
VEL_DIM = NUM_JOINTS * 3                 # 72
CONTACT_DIM = 2

STAGE_FILES = {
    "leaf": "pose_leaf.smc",
    "full": "pose_full.smc",
    "rot": "pose_rot.smc",
    "vel": "pose_vel.smc",
    "contact": "pose_contact.smc",
}

STAGE_DIMS = {
    "leaf": (FEATURE_DIM, LEAF_DIM),
    "full": (FEATURE_DIM + LEAF_DIM, JOINT_DIM),
    "rot": (FEATURE_DIM + JOINT_DIM, ROT_DIM),
    "vel": (FEATURE_DIM + JOINT_DIM, VEL_DIM),
    "contact": (FEATURE_DIM + JOINT_DIM, CONTACT_DIM),
}


@dataclass(frozen=True)
class PoseEstimate:
    theta: np.ndarray            # (24, 6)
    leaf_positions: np.ndarray   # (5, 3), root frame
    joint_positions: np.ndarray  # (24, 3), root frame
    velocities: np.ndarray       # (24, 3) m/s, world frame
    contact_prob: np.ndarray     # (2,) in [0, 1]


@dataclass
class PoseStages:
    leaf: object
    full: object
    rot: object
    vel: object
    contact: object

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        for name, fname in STAGE_FILES.items():
            save_model(getattr(self, name), os.path.join(directory, fname))

    @staticmethod
    def load(directory):
        models = {}
        missing = [f for f in STAGE_FILES.values()
                   if not os.path.exists(os.path.join(directory, f))]
        if missing:
            raise FileNotFoundError(
                f"missing pose stage files in {directory}: {missing}")
        for name, fname in STAGE_FILES.items():
            din, dout = STAGE_DIMS[name]
            models[name] = load_model(os.path.join(directory, fname),
                                      expect_input_dim=din,
                                      expect_output_dim=dout)
        return PoseStages(**models)


def stage_targets(body, motion):
    """Ground-truth stage outputs for a template-body motion."""
    mats = rot6d_decode(motion.rotations)
    R, p = forward_kinematics_batch(body, mats, motion.translation)
    root_inv = np.swapaxes(R[:, 0], -1, -2)
    rel = np.einsum("nab,njb->nja", root_inv, p - p[:, :1])
    vel = joint_velocities(motion, body)
    vel_root = root_frame_velocities(motion.rotations, vel)
    contacts = foot_contact_labels(body, motion).astype(float)
    n = len(motion)
    return {
        "leaf": rel[:, list(LEAF_JOINTS)].reshape(n, -1),
        "full": rel.reshape(n, -1),
        "rot": motion.rotations[:, 1:].reshape(n, -1),
        "vel": vel_root.reshape(n, -1),
        "contact": contacts,
    }


def build_stage_datasets(corpus):
    """corpus: [(features (N, 90), targets dict)] -> per-stage datasets.

    Stages 2+ are teacher-forced: their inputs carry the ground-truth
    outputs of the previous stage.
    """
    sets = {name: [] for name in STAGE_FILES}
    for feats, tg in corpus:
        sets["leaf"].append((feats, tg["leaf"]))
        x_full = np.concatenate([feats, tg["leaf"]], axis=1)
        sets["full"].append((x_full, tg["full"]))
        x_rest = np.concatenate([feats, tg["full"]], axis=1)
        sets["rot"].append((x_rest, tg["rot"]))
        sets["vel"].append((x_rest, tg["vel"]))
        sets["contact"].append((x_rest, tg["contact"]))
    return sets


def train_pose_stages(corpus, cfg, verbose=False):
    """Train the 3 stages + 2 heads on a template-body corpus.

    corpus: [(features, targets)] from stage_targets; returns
    (PoseStages, history dict).
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    sets = build_stage_datasets(corpus)
    models, history = {}, {}
    for i, name in enumerate(STAGE_FILES):
        from dataclasses import replace
        stage_cfg = replace(cfg, seed=cfg.seed + i,
                            loss="bce" if name == "contact" else "mse")
        din, dout = STAGE_DIMS[name]
        models[name], history[name] = train_regressor(
            sets[name], stage_cfg, input_dim=din, output_dim=dout,
            verbose=verbose)
    return PoseStages(**models), history


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _assemble_theta(root_R, rot_flat):
    theta = np.empty((NUM_JOINTS, 6))
    theta[0] = rot6d_encode(root_R)
    theta[1:] = rot_flat.reshape(NUM_JOINTS - 1, 6)
    return theta


class PoseEstimator:
    """Streaming three-stage pose estimation with velocity/contact heads."""

    def __init__(self, stages):
        self.streams = {name: RegressorStream(getattr(stages, name))
                        for name in STAGE_FILES}

    def reset(self):
        for s in self.streams.values():
            s.reset()

    def step(self, features, root_R):
        features = np.asarray(features, dtype=float)
        leaf = self.streams["leaf"].step(features)
        x_full = np.concatenate([features, leaf])
        joints = self.streams["full"].step(x_full)
        x_rest = np.concatenate([features, joints])
        rot = self.streams["rot"].step(x_rest)
        vel = self.streams["vel"].step(x_rest)
        contact = _sigmoid(self.streams["contact"].step(x_rest))
        theta = _assemble_theta(root_R, rot)
        vel_world = (root_R @ vel.reshape(NUM_JOINTS, 3).T).T
        return PoseEstimate(theta=theta,
                            leaf_positions=leaf.reshape(-1, 3),
                            joint_positions=joints.reshape(-1, 3),
                            velocities=vel_world,
                            contact_prob=contact)


def estimate_pose_sequence(stages, features, root_R):
    """Whole-sequence (offline) version of PoseEstimator.step."""
    n = len(features)
    leaf = stages.leaf.run_numpy(features)
    x_full = np.concatenate([features, leaf], axis=1)
    joints = stages.full.run_numpy(x_full)
    x_rest = np.concatenate([features, joints], axis=1)
    rot = stages.rot.run_numpy(x_rest)
    vel = stages.vel.run_numpy(x_rest)
    contact = _sigmoid(stages.contact.run_numpy(x_rest))
    theta = np.empty((n, NUM_JOINTS, 6))
    theta[:, 0] = rot6d_encode(root_R)
    theta[:, 1:] = rot.reshape(n, NUM_JOINTS - 1, 6)
    vel_world = np.einsum("nab,njb->nja", root_R,
                          vel.reshape(n, NUM_JOINTS, 3))
    return {"theta": theta, "leaf": leaf.reshape(n, -1, 3),
            "joints": joints.reshape(n, -1, 3), "velocities": vel_world,
            "contacts": contact}


def pose_corpus_from_pairs(pairs, body, template_side=True):
    """Template-side training corpus: (features, stage targets) per pair."""
    out = []
    for p in pairs:
        imu = p.imu_template if template_side else p.imu_real
        motion = p.motion_template if template_side else p.motion_real
        feats = preprocess_imu(imu)
        out.append((feats, stage_targets(body, motion)))
    return out
