"""Procedural parametric human body: 24-joint skeleton, per-bone capsules,
coarse skinned mesh, and IMU mount points.

The body stands in a T-pose with heels on the ground plane (y = 0) when the
pose is identity and the root translation is zero.  All lengths are meters.
Coordinates are x-left, y-up, z-forward.
"""

from dataclasses import dataclass, field

import numpy as np

from . import config
from .rotations import rot6d_decode, rot6d_encode

NUM_JOINTS = 24

JOINT_NAMES = (
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2",
    "l_ankle", "r_ankle", "spine3", "l_foot", "r_foot", "neck", "l_collar",
    "r_collar", "head", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
    "l_wrist", "r_wrist", "l_hand", "r_hand",
)

PARENTS = np.array([-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                    9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21])

SIP_JOINTS = (1, 2, 16, 17)          # hips and shoulders
LEAF_JOINTS = (20, 21, 7, 8, 15)     # wrists, ankles, head

# Template rest offsets (joint position in the parent frame, meters).
_TEMPLATE_OFFSETS = np.array([
    [0.000, 0.915, 0.000],    # pelvis (from world origin)
    [+0.090, -0.055, 0.000],  # l_hip
    [-0.090, -0.055, 0.000],  # r_hip
    [0.000, 0.065, 0.000],    # spine1
    [0.000, -0.380, 0.000],   # l_knee
    [0.000, -0.380, 0.000],   # r_knee
    [0.000, 0.100, 0.000],    # spine2
    [0.000, -0.390, 0.000],   # l_ankle
    [0.000, -0.390, 0.000],   # r_ankle
    [0.000, 0.110, 0.000],    # spine3
    [0.000, -0.055, 0.110],   # l_foot (ball of foot)
    [0.000, -0.055, 0.110],   # r_foot
    [0.000, 0.150, 0.000],    # neck
    [+0.065, 0.100, 0.000],   # l_collar
    [-0.065, 0.100, 0.000],   # r_collar
    [0.000, 0.180, 0.000],    # head
    [+0.115, 0.035, 0.000],   # l_shoulder
    [-0.115, 0.035, 0.000],   # r_shoulder
    [+0.260, 0.000, 0.000],   # l_elbow
    [-0.260, 0.000, 0.000],   # r_elbow
    [+0.250, 0.000, 0.000],   # l_wrist
    [-0.250, 0.000, 0.000],   # r_wrist
    [+0.080, 0.000, 0.000],   # l_hand
    [-0.080, 0.000, 0.000],   # r_hand
])

# Capsule per joint: segment from the joint towards _CAPSULE_CHILD[j] (or a
# fixed extension vector for leaves) with radius _TEMPLATE_RADII[j].
_CAPSULE_CHILD = np.array([3, 4, 5, 6, 7, 8, 9, 10, 11, 12, -1, -1,
                           15, 16, 17, -1, 18, 19, 20, 21, 22, 23, -1, -1])
_LEAF_EXTENSION = {
    10: np.array([0.0, -0.005, 0.030]),   # toes
    11: np.array([0.0, -0.005, 0.030]),
    15: np.array([0.0, 0.120, 0.000]),    # skull: top reaches 1.70 exactly
    22: np.array([+0.040, 0.0, 0.0]),     # fingers
    23: np.array([-0.040, 0.0, 0.0]),
}
_TEMPLATE_RADII = np.array([
    0.118, 0.082, 0.082, 0.118, 0.056, 0.056, 0.112, 0.035, 0.035, 0.100,
    0.030, 0.030, 0.052, 0.054, 0.054, 0.060, 0.045, 0.045, 0.038, 0.038,
    0.032, 0.032, 0.028, 0.028,
])

# beta[0..4] scale rest offsets of joint groups, beta[5..9] scale capsule
# radii of joint groups; each unit of beta changes its group by 5%.
BETA_GAIN = 0.05
_LENGTH_GROUPS = (
    (4, 5, 7, 8, 10, 11),        # 0: legs
    (18, 19, 20, 21, 22, 23),    # 1: arms
    (3, 6, 9, 12),               # 2: torso
    (1, 2, 13, 14, 16, 17),      # 3: shoulder/hip width
    (15,),                       # 4: head/neck length
)
_GIRTH_GROUPS = (
    (0, 3, 6, 9, 13, 14),            # 5: torso
    (1, 2, 4, 5, 7, 8, 10, 11),      # 6: legs
    (16, 17, 18, 19, 20, 21, 22, 23),  # 7: arms
    (12, 15),                        # 8: head/neck
    tuple(range(NUM_JOINTS)),        # 9: everything
)

# IMU mounts: (joint index, local offset, local orientation).
_MOUNT_SPECS = (
    ("left_wrist", 20, (+0.010, 0.0, 0.037)),
    ("right_wrist", 21, (-0.010, 0.0, 0.037)),
    ("left_lower_leg", 4, (0.0, -0.150, 0.057)),
    ("right_lower_leg", 5, (0.0, -0.150, 0.057)),
    ("head", 15, (0.0, 0.050, 0.065)),
    ("waist", 0, (0.0, 0.020, -0.120)),
)

_RINGS_PER_CAPSULE = 3
_POINTS_PER_RING = 8


class ShapeError(ValueError):
    """Raised for out-of-range shape parameters."""


@dataclass(frozen=True)
class ShapeParams:
    """10 shape coefficients plus a height scale (1.0 = template)."""

    beta: np.ndarray = field(default_factory=lambda: np.zeros(10))
    height_scale: float = 1.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).reshape(10)
        object.__setattr__(self, "beta", beta)
        if not np.all(np.isfinite(beta)):
            raise ShapeError("beta must be finite")
        if not (0.3 < self.height_scale < 2.5):
            raise ShapeError(f"height_scale {self.height_scale} outside (0.3, 2.5)")

    def as_vector(self):
        return np.concatenate([self.beta, [self.height_scale]])

    @staticmethod
    def from_vector(v):
        v = np.asarray(v, dtype=float).reshape(11)
        return ShapeParams(beta=v[:10], height_scale=float(v[10]))


@dataclass(frozen=True)
class Skeleton:
    parent: np.ndarray       # (24,) int, parent[0] = -1
    rest_offset: np.ndarray  # (24, 3) meters, in the parent frame

    @property
    def joint_count(self):
        return len(self.parent)


@dataclass(frozen=True)
class Pose:
    """24 joint rotations (6D) plus the root translation."""

    rotations: np.ndarray         # (24, 6)
    root_translation: np.ndarray  # (3,)

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=float).reshape(NUM_JOINTS, 6)
        tr = np.asarray(self.root_translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "root_translation", tr)

    @staticmethod
    def identity(translation=(0.0, 0.0, 0.0)):
        r6 = np.tile(rot6d_encode(np.eye(3)), (NUM_JOINTS, 1))
        return Pose(rotations=r6, root_translation=np.asarray(translation, float))

    def matrices(self):
        return rot6d_decode(self.rotations)


@dataclass(frozen=True)
class JointTransforms:
    rotation: np.ndarray  # (24, 3, 3) world
    position: np.ndarray  # (24, 3) world


@dataclass(frozen=True)
class ImuMount:
    name: str
    bone: int
    offset: np.ndarray       # (3,) in the bone frame
    orientation: np.ndarray  # (3, 3) sensor frame in the bone frame


@dataclass(frozen=True)
class BodyModel:
    shape: ShapeParams
    skeleton: Skeleton
    capsule_radius: np.ndarray   # (24,)
    capsule_vector: np.ndarray   # (24, 3) segment direction*length, bone frame
    vertices_rest: np.ndarray    # (V, 3) world, rest pose
    skin_weights: np.ndarray     # (V, 24) row-stochastic
    vertex_bone: np.ndarray      # (V,) generating capsule
    imu_mounts: tuple            # 6 ImuMount entries
    foot_vertex_indices: np.ndarray  # (4,) l_toe, l_heel, r_toe, r_heel

    @property
    def joint_count(self):
        return NUM_JOINTS

    def rest_joint_positions(self):
        return _accumulate_offsets(self.skeleton)

    def standing_height(self):
        ys = self.vertices_rest[:, 1]
        return float(ys.max() - ys.min())


def _accumulate_offsets(skeleton):
    pos = np.zeros((NUM_JOINTS, 3))
    for j in range(NUM_JOINTS):
        p = skeleton.parent[j]
        pos[j] = skeleton.rest_offset[j] if p < 0 else pos[p] + skeleton.rest_offset[j]
    return pos


def _shape_offsets_and_radii(shape):
    offsets = _TEMPLATE_OFFSETS.copy()
    radii = _TEMPLATE_RADII.copy()
    ext = {j: v.copy() for j, v in _LEAF_EXTENSION.items()}
    for k, group in enumerate(_LENGTH_GROUPS):
        f = 1.0 + BETA_GAIN * shape.beta[k]
        for j in group:
            offsets[j] *= f
            if j in ext:
                ext[j] *= f
    for k, group in enumerate(_GIRTH_GROUPS):
        f = 1.0 + BETA_GAIN * shape.beta[5 + k]
        for j in group:
            radii[j] *= f
    if np.any(radii <= 0.0) or np.any(np.linalg.norm(offsets[1:], axis=1) <= 0.0):
        raise ShapeError("beta collapses the body geometry")
    s = shape.height_scale
    offsets *= s
    radii *= s
    ext = {j: v * s for j, v in ext.items()}
    return offsets, radii, ext


def _capsule_segments(skeleton, radii, ext):
    """Rest-pose world segment (start, end) per capsule."""
    joints = _accumulate_offsets(skeleton)
    starts = joints.copy()
    ends = np.empty_like(starts)
    for j in range(NUM_JOINTS):
        c = _CAPSULE_CHILD[j]
        ends[j] = joints[c] if c >= 0 else joints[j] + ext[j]
    return starts, ends


def _ring_frame(axis):
    """Deterministic orthonormal (u, v) perpendicular to axis."""
    a = axis / np.linalg.norm(axis)
    ref = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(a, ref)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    return u, v


def _generate_mesh(starts, ends, radii):
    """Ring vertices on every capsule plus head/hand apexes and foot soles.

    Returns (vertices, vertex_bone, foot_indices) with foot_indices ordered
    l_toe, l_heel, r_toe, r_heel.
    """
    verts, bones = [], []
    phis = 2.0 * np.pi * np.arange(_POINTS_PER_RING) / _POINTS_PER_RING
    for j in range(NUM_JOINTS):
        seg = ends[j] - starts[j]
        u, v = _ring_frame(seg)
        for t in np.linspace(0.15, 0.85, _RINGS_PER_CAPSULE):
            center = starts[j] + t * seg
            for phi in phis:
                verts.append(center + radii[j] * (np.cos(phi) * u + np.sin(phi) * v))
                bones.append(j)
    # apex vertices so the mesh reaches the skull top and finger tips
    for j in (15, 22, 23):
        seg = ends[j] - starts[j]
        verts.append(ends[j] + radii[j] * seg / np.linalg.norm(seg))
        bones.append(j)
    # explicit sole vertices: extremal toe/heel contact points per foot
    foot_idx = []
    for toe_bone, heel_bone in ((10, 7), (11, 8)):
        toe_end = ends[toe_bone]
        ankle = starts[heel_bone]
        sole_y = toe_end[1] - radii[toe_bone]
        toe = np.array([toe_end[0], sole_y, toe_end[2] + 0.7 * radii[toe_bone]])
        heel = np.array([ankle[0], sole_y, ankle[2] - 0.035 * (radii[heel_bone] / 0.035)])
        foot_idx.append(len(verts)); verts.append(toe); bones.append(toe_bone)
        foot_idx.append(len(verts)); verts.append(heel); bones.append(heel_bone)
    order = np.array([foot_idx[0], foot_idx[1], foot_idx[2], foot_idx[3]])
    return np.array(verts), np.array(bones), order


def _point_segment_distance(points, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return np.linalg.norm(points - a, axis=-1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(points - closest, axis=-1)


def _skin_weights(verts, bones, starts, ends, foot_indices):
    """Nearest-2-capsule inverse-distance weights; sole vertices are rigid."""
    V = len(verts)
    dists = np.empty((V, NUM_JOINTS))
    for j in range(NUM_JOINTS):
        dists[:, j] = _point_segment_distance(verts, starts[j], ends[j])
    w = np.zeros((V, NUM_JOINTS))
    nearest2 = np.argsort(dists, axis=1)[:, :2]
    rows = np.arange(V)
    for k in range(2):
        col = nearest2[:, k]
        w[rows, col] = 1.0 / (dists[rows, col] + 1e-6)
    w /= w.sum(axis=1, keepdims=True)
    # contact vertices follow their own bone rigidly
    for idx in foot_indices:
        w[idx] = 0.0
        w[idx, bones[idx]] = 1.0
    return w


def build_body(shape=None):
    """Build a BodyModel from shape parameters (deterministic).

    beta = 0, height_scale = 1 reproduces the template exactly: standing
    height TEMPLATE_HEIGHT_M, heels on the ground plane.  Bone lengths are
    linear in height_scale; beta[0..4] perturb limb-group lengths and
    beta[5..9] capsule-group radii by 5% per unit (see BETA_GAIN), which for
    nonzero beta also shifts proportions and hence the standing height.
    """
    if shape is None:
        shape = ShapeParams()
    offsets, radii, ext = _shape_offsets_and_radii(shape)
    skeleton = Skeleton(parent=PARENTS.copy(), rest_offset=offsets)
    starts, ends = _capsule_segments(skeleton, radii, ext)
    verts, bones, foot_idx = _generate_mesh(starts, ends, radii)
    weights = _skin_weights(verts, bones, starts, ends, foot_idx)
    mounts = []
    for name, bone, off in _MOUNT_SPECS:
        mounts.append(ImuMount(name=name, bone=bone,
                               offset=np.asarray(off) * shape.height_scale,
                               orientation=np.eye(3)))
    return BodyModel(
        shape=shape,
        skeleton=skeleton,
        capsule_radius=radii,
        capsule_vector=ends - starts,
        vertices_rest=verts,
        skin_weights=weights,
        vertex_bone=bones,
        imu_mounts=tuple(mounts),
        foot_vertex_indices=foot_idx,
    )


def forward_kinematics_batch(body, rotations, translations):
    """FK over a batch of frames.

    rotations: (N, 24, 3, 3); translations: (N, 3).  Returns world
    (R, p) with shapes (N, 24, 3, 3) and (N, 24, 3).  The root world
    position is rest_offset[0] + translation, so zero translation stands
    the body at the origin.
    """
    rotations = np.asarray(rotations, dtype=float)
    translations = np.asarray(translations, dtype=float)
    if rotations.ndim == 3:
        rotations = rotations[None]
    if translations.ndim == 1:
        translations = translations[None]
    N = rotations.shape[0]
    off = body.skeleton.rest_offset
    R = np.empty((N, NUM_JOINTS, 3, 3))
    p = np.empty((N, NUM_JOINTS, 3))
    R[:, 0] = rotations[:, 0]
    p[:, 0] = off[0] + translations
    for j in range(1, NUM_JOINTS):
        par = body.skeleton.parent[j]
        R[:, j] = R[:, par] @ rotations[:, j]
        p[:, j] = p[:, par] + np.einsum("nab,b->na", R[:, par], off[j])
    return R, p


def forward_kinematics(body, pose):
    """FK for a single Pose; returns JointTransforms."""
    R, p = forward_kinematics_batch(body, pose.matrices(), pose.root_translation)
    return JointTransforms(rotation=R[0], position=p[0])


def skin_vertices(body, transforms, indices=None):
    """Linear blend skinning.  transforms from forward_kinematics of the
    same body; identity pose returns vertices_rest exactly."""
    R, p = transforms.rotation, transforms.position
    rest_j = body.rest_joint_positions()
    verts = body.vertices_rest if indices is None else body.vertices_rest[indices]
    weights = body.skin_weights if indices is None else body.skin_weights[indices]
    out = np.zeros_like(verts)
    for j in np.flatnonzero(weights.any(axis=0)):
        w = weights[:, j]
        mask = w > 0.0
        local = verts[mask] - rest_j[j]
        out[mask] += w[mask, None] * (local @ R[j].T + p[j])
    return out


def skin_vertices_batch(body, R, p, indices=None):
    """LBS over frames: R (N,24,3,3), p (N,24,3) -> (N, V, 3)."""
    rest_j = body.rest_joint_positions()
    verts = body.vertices_rest if indices is None else body.vertices_rest[indices]
    weights = body.skin_weights if indices is None else body.skin_weights[indices]
    N = R.shape[0]
    out = np.zeros((N, len(verts), 3))
    for j in np.flatnonzero(weights.any(axis=0)):
        w = weights[:, j]
        mask = w > 0.0
        local = verts[mask] - rest_j[j]
        moved = np.einsum("nab,vb->nva", R[:, j], local) + p[:, None, j]
        out[:, mask] += w[mask, None] * moved
    return out


def foot_vertices(body):
    """Indices of the toe/heel contact vertices (l_toe, l_heel, r_toe,
    r_heel): the extremal-z mesh vertices of each foot in the rest pose."""
    return body.foot_vertex_indices.copy()


def mount_transforms_batch(body, R, p):
    """World rotation and position of the 6 IMU mounts per frame."""
    M = len(body.imu_mounts)
    N = R.shape[0]
    Rm = np.empty((N, M, 3, 3))
    pm = np.empty((N, M, 3))
    for k, m in enumerate(body.imu_mounts):
        Rm[:, k] = R[:, m.bone] @ m.orientation
        pm[:, k] = p[:, m.bone] + np.einsum("nab,b->na", R[:, m.bone], m.offset)
    return Rm, pm
