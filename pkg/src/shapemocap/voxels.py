"""Voxelized mass properties: per-joint mass, center of mass, inertia.

The rest-pose body is sampled on a regular grid; a point is inner iff it
lies inside any capsule.  Point weights interpolate the skin weights of the
nearest mesh vertices.  A uniform density converts voxel volume to mass.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import config
from .body import NUM_JOINTS, _capsule_segments, _shape_offsets_and_radii

RES_MIN = 0.005
RES_MAX = 0.05


class MassPropertyError(ValueError):
    pass


@dataclass(frozen=True)
class VoxelCloud:
    points: np.ndarray   # (P, 3) meters, rest pose
    weights: np.ndarray  # (P, 24) row-stochastic
    res: float           # voxel edge length, meters

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(pts), NUM_JOINTS):
            raise ValueError("weights must be (P, 24)")
        if np.any(w < -1e-12):
            raise ValueError("negative point weights")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class MassProperties:
    mass: np.ndarray     # (24,) kg
    com: np.ndarray      # (24, 3) offset from the joint, meters
    inertia: np.ndarray  # (24, 3, 3) kg m^2 about the com

    @property
    def total_mass(self):
        return float(self.mass.sum())


def points_inside_capsules(starts, ends, radii, res, chunk=200000):
    """Grid-sample the union of capsules; returns inner point centers."""
    starts = np.asarray(starts, float).reshape(-1, 3)
    ends = np.asarray(ends, float).reshape(-1, 3)
    radii = np.asarray(radii, float).reshape(-1)
    rmax = radii.max()
    lo = np.minimum(starts, ends).min(axis=0) - rmax
    hi = np.maximum(starts, ends).max(axis=0) + rmax
    axes = [np.arange(lo[d] + res / 2.0, hi[d], res) for d in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    out = []
    for i in range(0, len(grid), chunk):
        pts = grid[i:i + chunk]
        inner = np.zeros(len(pts), dtype=bool)
        for s, e, r in zip(starts, ends, radii):
            ab = e - s
            denom = float(ab @ ab)
            if denom < 1e-18:
                d = np.linalg.norm(pts - s, axis=1)
            else:
                t = np.clip((pts - s) @ ab / denom, 0.0, 1.0)
                d = np.linalg.norm(pts - (s + t[:, None] * ab), axis=1)
            inner |= d <= r
        out.append(pts[inner])
    return np.concatenate(out, axis=0)


def voxelize(body, res=config.VOXEL_RES_M):
    """Sample the body volume at spacing res and interpolate skin weights."""
    if not (RES_MIN <= res <= RES_MAX):
        raise MassPropertyError(f"res {res} outside [{RES_MIN}, {RES_MAX}]")
    offsets, radii, ext = _shape_offsets_and_radii(body.shape)
    starts, ends = _capsule_segments(body.skeleton, radii, ext)
    pts = points_inside_capsules(starts, ends, radii, res)
    tree = cKDTree(body.vertices_rest)
    d, idx = tree.query(pts, k=4)
    inv = 1.0 / (d + 1e-9)
    inv /= inv.sum(axis=1, keepdims=True)
    weights = np.einsum("pk,pkj->pj", inv, body.skin_weights[idx])
    weights /= weights.sum(axis=1, keepdims=True)
    return VoxelCloud(points=pts, weights=weights, res=res)


def point_mass(weight, res, density=config.BODY_DENSITY_KG_M3):
    """Mass contribution of one grid point: density * weight * res^3."""
    if not 0.0 <= weight <= 1.0:
        raise MassPropertyError(f"weight {weight} outside [0, 1]")
    return density * weight * res ** 3


def joint_mass(cloud, density=config.BODY_DENSITY_KG_M3):
    """Per-joint mass: density * res^3 * column sums of the weights."""
    return density * cloud.res ** 3 * cloud.weights.sum(axis=0)


def joint_com(cloud, joint_positions, density=config.BODY_DENSITY_KG_M3,
              joints=None):
    """Mass-weighted mean offset of points from each joint position.

    joints selects which joints are queried (default: all 24).  A queried
    joint with zero mass has no defined com and raises MassPropertyError;
    unqueried joints are returned as NaN.
    """
    m = joint_mass(cloud, density)
    if joints is None:
        joints = np.arange(NUM_JOINTS)
    joints = np.asarray(joints, dtype=int)
    zero = joints[m[joints] <= 0.0]
    if len(zero):
        raise MassPropertyError(f"zero-mass joints (com undefined): {zero.tolist()}")
    w = density * cloud.res ** 3 * cloud.weights  # (P, 24) point masses
    com = np.full((NUM_JOINTS, 3), np.nan)
    com[joints] = (np.einsum("pj,pd->jd", w[:, joints], cloud.points)
                   / m[joints, None])
    return com - np.asarray(joint_positions, float)


def joint_inertia(cloud, coms, joint_positions, density=config.BODY_DENSITY_KG_M3):
    """Inertia about each joint's com: sum_j m_ij (|r|^2 E - r r^T).

    Joints whose com is NaN (unqueried / massless) get a zero matrix.
    """
    w = density * cloud.res ** 3 * cloud.weights
    centers = np.asarray(joint_positions, float) + np.asarray(coms, float)
    out = np.zeros((NUM_JOINTS, 3, 3))
    pts = cloud.points
    for j in range(NUM_JOINTS):
        if not np.all(np.isfinite(centers[j])):
            continue
        r = pts - centers[j]
        wj = w[:, j]
        r2 = np.einsum("pd,pd->p", r, r)
        out[j] = np.eye(3) * (wj @ r2) - np.einsum("p,pa,pb->ab", wj, r, r)
    return out


def compute_mass_properties(body, res=config.VOXEL_RES_M,
                            density=config.BODY_DENSITY_KG_M3):
    """voxelize -> joint_mass -> joint_com -> joint_inertia."""
    cloud = voxelize(body, res)
    joints = body.rest_joint_positions()
    mass = joint_mass(cloud, density)
    com = joint_com(cloud, joints, density)
    inertia = joint_inertia(cloud, com, joints, density)
    return MassProperties(mass=mass, com=com, inertia=inertia)
