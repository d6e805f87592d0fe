"""Procedural motion families used for synthetic corpora.

Every generator returns a MotionSequence on the body it was grounded on
(normally the template).  Grounding constructs the root translation by
pinning a scheduled foot vertex, so foot-contact frames are world-stationary
by construction and the stationarity detector fires on them.
"""

from dataclasses import dataclass, field

import numpy as np

from . import config
from .body import NUM_JOINTS, forward_kinematics_batch, skin_vertices_batch, foot_vertices
from .rotations import rot6d_encode, rotation_about

FAMILIES = ("stand", "swing", "walk", "squat", "jump")

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class MotionSequence:
    """Per-frame pose (24 x 6D rotations) plus root translation at 60 FPS."""

    rotations: np.ndarray    # (N, 24, 6)
    translation: np.ndarray  # (N, 3)
    rate: float = config.FRAME_RATE

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=float)
        tr = np.asarray(self.translation, dtype=float)
        if rot.ndim != 3 or rot.shape[1:] != (NUM_JOINTS, 6):
            raise ValueError(f"rotations must be (N, 24, 6), got {rot.shape}")
        if tr.shape != (rot.shape[0], 3):
            raise ValueError(f"translation must be (N, 3), got {tr.shape}")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translation", tr)

    def __len__(self):
        return self.rotations.shape[0]


def _identity_rotations(n):
    r6 = rot6d_encode(np.eye(3))
    return np.tile(r6, (n, NUM_JOINTS, 1))


def _set_joint(rot6d, joint, axis, angles):
    """Write per-frame rotations about a fixed axis into one joint."""
    mats = np.stack([rotation_about(axis, a) for a in np.atleast_1d(angles)])
    rot6d[:, joint, :] = rot6d_encode(mats)


def pose_foot_positions(body, rotations_6d):
    """Foot contact vertex positions from pose only (zero translation)."""
    from .rotations import rot6d_decode
    mats = rot6d_decode(rotations_6d)
    R, p = forward_kinematics_batch(body, mats, np.zeros((len(mats), 3)))
    return skin_vertices_batch(body, R, p, indices=foot_vertices(body))


def ground_by_pinning(body, rotations_6d, pin_schedule, initial_xz=(0.0, 0.0),
                      flight_increments=None):
    """Build a root translation that pins scheduled foot vertices.

    pin_schedule[i] is the foot-vertex index (0..3) pinned between frames
    i-1 and i, or -1 for airborne frames (the increment then comes from
    flight_increments[i]).  Frame 0 drops the body so its lowest foot
    vertex touches the ground plane.
    """
    fv = pose_foot_positions(body, rotations_6d)
    n = len(fv)
    tran = np.zeros((n, 3))
    tran[0] = [initial_xz[0], -fv[0, :, 1].min(), initial_xz[1]]
    for i in range(1, n):
        k = pin_schedule[i]
        if k >= 0:
            tran[i] = tran[i - 1] + (fv[i - 1, k] - fv[i, k])
        else:
            tran[i] = tran[i - 1] + flight_increments[i]
    return MotionSequence(rotations=rotations_6d, translation=tran)


def stand(frames=240, sway=0.0, freq=0.25):
    """Static T-pose, optionally with a small torso sway."""
    rot = _identity_rotations(frames)
    if sway > 0.0:
        t = np.arange(frames) / config.FRAME_RATE
        _set_joint(rot, 3, _Z, sway * np.sin(2 * np.pi * freq * t))
    return rot


def swing(frames=240, limb="left_arm", amp=0.8, freq=1.0, split=1.0, phase=0.0):
    """Sinusoidal limb swing with a parent/child split.

    The proximal joint takes split*amp and the distal joint (1-split)*amp
    about the same axis, so the end-effector orientation is identical for
    every split while its trajectory (and acceleration) is not.
    """
    t = np.arange(frames) / config.FRAME_RATE
    angles = amp * np.sin(2 * np.pi * freq * t + phase)
    rot = _identity_rotations(frames)
    chains = {
        "left_arm": (16, 18, _Z),
        "right_arm": (17, 19, _Z),
        "left_leg": (1, 4, _X),
        "right_leg": (2, 5, _X),
    }
    prox, dist, axis = chains[limb]
    _set_joint(rot, prox, axis, split * angles)
    _set_joint(rot, dist, axis, (1.0 - split) * angles)
    return rot


def squat(frames=240, depth=0.7, freq=0.5):
    """Symmetric squat cycle; both feet stay planted."""
    t = np.arange(frames) / config.FRAME_RATE
    alpha = depth * 0.5 * (1.0 - np.cos(2 * np.pi * freq * t))
    rot = _identity_rotations(frames)
    for hip, knee, ankle in ((1, 4, 7), (2, 5, 8)):
        _set_joint(rot, hip, _X, -alpha)
        _set_joint(rot, knee, _X, 2.0 * alpha)
        _set_joint(rot, ankle, _X, -alpha)
    return rot


def walk_rotations(frames=300, freq=1.0, hip_amp=0.5, knee_amp=0.6,
                   arm_amp=0.4, sway=0.09):
    """Alternating gait pose cycle (no translation; see make_walk).

    A leg is in stance exactly while its hip angle sweeps monotonically
    from front to back, so the root passes over the planted foot once per
    step and never reverses.  Stance-hip ab/adduction (sway) shifts the
    pelvis over the planted foot and the ankles keep the stance foot flat,
    which keeps the cycle dynamically trackable.
    """
    t = np.arange(frames) / config.FRAME_RATE
    phase = 2 * np.pi * freq * t
    rot = _identity_rotations(frames)
    hip_l = hip_amp * np.sin(phase)
    hip_r = hip_amp * np.sin(phase + np.pi)
    # knee flexes during the swing (hip moving forward), straight in stance
    knee_l = knee_amp * np.clip(np.cos(phase), 0.0, None)
    knee_r = knee_amp * np.clip(-np.cos(phase), 0.0, None)
    # stance weights blend ankle flattening and lateral sway smoothly
    stance_l = np.clip(-np.cos(phase), 0.0, 1.0)
    stance_r = np.clip(np.cos(phase), 0.0, 1.0)
    sway_l = -sway * stance_l
    sway_r = +sway * stance_r
    mats_hip_l = [rotation_about(_Z, sl) @ rotation_about(_X, a)
                  for sl, a in zip(sway_l, hip_l)]
    mats_hip_r = [rotation_about(_Z, sr) @ rotation_about(_X, a)
                  for sr, a in zip(sway_r, hip_r)]
    rot[:, 1, :] = rot6d_encode(np.stack(mats_hip_l))
    rot[:, 2, :] = rot6d_encode(np.stack(mats_hip_r))
    _set_joint(rot, 4, _X, knee_l)
    _set_joint(rot, 5, _X, knee_r)
    mats_ank_l = [rotation_about(_X, -a * sl) @ rotation_about(_Z, -s)
                  for a, sl, s in zip(hip_l, stance_l, sway_l)]
    mats_ank_r = [rotation_about(_X, -a * sr) @ rotation_about(_Z, -s)
                  for a, sr, s in zip(hip_r, stance_r, sway_r)]
    rot[:, 7, :] = rot6d_encode(np.stack(mats_ank_l))
    rot[:, 8, :] = rot6d_encode(np.stack(mats_ank_r))
    _set_joint(rot, 16, _Z, arm_amp * np.sin(phase + np.pi) * 0.5)
    _set_joint(rot, 17, _Z, arm_amp * np.sin(phase) * 0.5)
    # left hip decreasing (front-to-back sweep) <=> cos(phase) < 0
    left_stance = np.cos(phase) < 0.0
    return rot, left_stance


def make_walk(body, frames=300, freq=1.0, hip_amp=0.5, knee_amp=0.6,
              arm_amp=0.4, heading=0.0):
    rot, left_stance = walk_rotations(frames, freq, hip_amp, knee_amp, arm_amp)
    if heading != 0.0:
        _set_joint(rot, 0, _Y, np.full(frames, heading))
    # pin the stance foot's toe vertex: indices (l_toe, l_heel, r_toe, r_heel)
    schedule = np.where(left_stance, 0, 2)
    return ground_by_pinning(body, rot, schedule)


def make_stationary(body, rotations_6d):
    """Ground a motion whose feet never leave the floor (pin the left toe)."""
    n = len(rotations_6d)
    return ground_by_pinning(body, rotations_6d, np.zeros(n, dtype=int))


def make_jump(body, frames=240, crouch_depth=0.5, flight_v0=2.2, lead_in=60):
    """Crouch, extend, ballistic flight, land, recover."""
    g = -config.GRAVITY[1]
    dt = config.DT
    n_flight = max(4, int(round(2 * flight_v0 / g * config.FRAME_RATE)))
    n_crouch = lead_in
    n_extend = 12
    n_recover = frames - n_crouch - n_extend - n_flight
    if n_recover < 10:
        raise ValueError("frames too short for the jump phases")
    alpha = np.concatenate([
        crouch_depth * 0.5 * (1 - np.cos(np.pi * np.arange(n_crouch) / n_crouch)),
        crouch_depth * (1 - np.arange(n_extend) / n_extend),
        np.zeros(n_flight),
        crouch_depth * 0.35 * np.sin(np.pi * np.arange(n_recover) / n_recover),
    ])
    rot = _identity_rotations(frames)
    for hip, knee, ankle in ((1, 4, 7), (2, 5, 8)):
        _set_joint(rot, hip, _X, -alpha)
        _set_joint(rot, knee, _X, 2.0 * alpha)
        _set_joint(rot, ankle, _X, -alpha)
    schedule = np.zeros(frames, dtype=int)
    flight = np.zeros((frames, 3))
    start = n_crouch + n_extend
    for i in range(start, start + n_flight):
        schedule[i] = -1
        tau = (i - start) * dt
        flight[i] = [0.0, (flight_v0 - g * (tau + 0.5 * dt)) * dt, 0.0]
    return ground_by_pinning(body, rot, schedule, flight_increments=flight)


def constant_rate_swing(frames, rate_rad_s, limb="left_arm"):
    """Unbounded constant-rate rotation of a limb (centripetal fixture)."""
    t = np.arange(frames) / config.FRAME_RATE
    rot = _identity_rotations(frames)
    chains = {"left_arm": (16, _Z), "right_arm": (17, _Z)}
    joint, axis = chains[limb]
    _set_joint(rot, joint, axis, rate_rad_s * t)
    return rot


def random_motion(body, rng, family=None, frames=240):
    """Draw one motion from the family mix (seeded)."""
    if family is None:
        family = FAMILIES[rng.integers(len(FAMILIES))]
    if family == "stand":
        rot = stand(frames, sway=float(rng.uniform(0.0, 0.05)))
        return family, make_stationary(body, rot)
    if family == "swing":
        limb = ("left_arm", "right_arm", "left_leg", "right_leg")[rng.integers(4)]
        rot = swing(frames, limb=limb,
                    amp=float(rng.uniform(0.3, 1.1)),
                    freq=float(rng.uniform(0.5, 1.4)),
                    split=float(rng.uniform(0.0, 1.0)),
                    phase=float(rng.uniform(0.0, 2 * np.pi)))
        if limb.endswith("leg"):
            # keep the other foot pinned while one leg kicks
            pin = 2 if limb == "left_leg" else 0
            return family, ground_by_pinning(body, rot, np.full(frames, pin, int))
        return family, make_stationary(body, rot)
    if family == "walk":
        return family, make_walk(body, frames,
                                 freq=float(rng.uniform(0.7, 1.3)),
                                 hip_amp=float(rng.uniform(0.3, 0.6)),
                                 knee_amp=float(rng.uniform(0.4, 0.8)),
                                 arm_amp=float(rng.uniform(0.2, 0.6)),
                                 heading=float(rng.uniform(-np.pi, np.pi)))
    if family == "squat":
        rot = squat(frames, depth=float(rng.uniform(0.4, 0.9)),
                    freq=float(rng.uniform(0.3, 0.7)))
        return family, make_stationary(body, rot)
    if family == "jump":
        return family, make_jump(body, frames,
                                 crouch_depth=float(rng.uniform(0.35, 0.6)),
                                 flight_v0=float(rng.uniform(1.6, 2.6)))
    raise ValueError(f"unknown family {family!r}")
