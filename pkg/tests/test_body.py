import numpy as np
import pytest

from shapemocap import config
from shapemocap.body import (NUM_JOINTS, Pose, ShapeError, ShapeParams,
                             build_body, foot_vertices, forward_kinematics,
                             forward_kinematics_batch, skin_vertices)
from shapemocap.rotations import rot6d_encode, rotation_about


def test_template_fixed_point(template_body):
    assert abs(template_body.standing_height() - config.TEMPLATE_HEIGHT_M) \
        < 0.01 * config.TEMPLATE_HEIGHT_M
    assert template_body.shape.height_scale == 1.0
    assert len(template_body.imu_mounts) == 6


def test_half_scale_offsets_exactly_halved(template_body, half_body):
    assert np.array_equal(half_body.skeleton.rest_offset,
                          0.5 * template_body.skeleton.rest_offset)


def test_radius_beta_leaves_lengths_unchanged(template_body):
    beta = np.zeros(10)
    beta[9] = 1.0
    fat = build_body(ShapeParams(beta=beta))
    assert np.array_equal(fat.skeleton.rest_offset,
                          template_body.skeleton.rest_offset)
    assert np.all(fat.capsule_radius > template_body.capsule_radius)


def test_length_beta_leaves_radii_unchanged(template_body):
    beta = np.zeros(10)
    beta[0] = 1.0
    long_legs = build_body(ShapeParams(beta=beta))
    assert np.array_equal(long_legs.capsule_radius, template_body.capsule_radius)
    assert np.linalg.norm(long_legs.skeleton.rest_offset[4]) > \
        np.linalg.norm(template_body.skeleton.rest_offset[4])


def test_out_of_range_height_scale():
    with pytest.raises(ShapeError):
        ShapeParams(height_scale=0.2)
    with pytest.raises(ShapeError):
        ShapeParams(height_scale=3.0)
    with pytest.raises(ShapeError):
        ShapeParams(beta=np.full(10, np.nan))


def test_standing_height_scales(template_body):
    for s in (0.5, 0.8, 1.2):
        b = build_body(ShapeParams(height_scale=s))
        assert abs(b.standing_height() - s * config.TEMPLATE_HEIGHT_M) \
            < 0.01 * s * config.TEMPLATE_HEIGHT_M


def test_fk_rest_configuration(template_body):
    tf = forward_kinematics(template_body, Pose.identity())
    acc = np.zeros((NUM_JOINTS, 3))
    for j in range(NUM_JOINTS):
        p = template_body.skeleton.parent[j]
        base = acc[p] if p >= 0 else 0.0
        acc[j] = base + template_body.skeleton.rest_offset[j]
    assert np.allclose(tf.position, acc, atol=0)
    assert np.allclose(tf.rotation, np.eye(3), atol=0)


def test_fk_root_yaw_180_negates_xz(template_body):
    rot = Pose.identity().rotations.copy()
    rot[0] = rot6d_encode(rotation_about([0, 1, 0], np.pi))
    tf = forward_kinematics(template_body, Pose(rot, np.zeros(3)))
    rest = forward_kinematics(template_body, Pose.identity())
    assert np.allclose(tf.position[:, 0], -rest.position[:, 0], atol=1e-12)
    assert np.allclose(tf.position[:, 2], -rest.position[:, 2], atol=1e-12)
    assert np.allclose(tf.position[:, 1], rest.position[:, 1], atol=1e-12)


def test_fk_two_link_chain_hand_computed(template_body):
    # Left arm: shoulder at (0.18, 1.325, 0), elbow offset (0.26, 0, 0),
    # wrist offset (0.25, 0, 0).  Bending the elbow 90 degrees about z maps
    # the wrist offset to (0, 0.25, 0), so the wrist lands at
    # (0.44, 1.575, 0).  Computed by hand from the template offset table.
    rot = Pose.identity().rotations.copy()
    rot[18] = rot6d_encode(rotation_about([0, 0, 1], np.pi / 2))
    tf = forward_kinematics(template_body, Pose(rot, np.zeros(3)))
    assert np.abs(tf.position[18] - [0.44, 1.325, 0.0]).max() < 1e-12
    assert np.abs(tf.position[20] - [0.44, 1.575, 0.0]).max() < 1e-12


def test_fk_locality(template_body, rng):
    from shapemocap.rotations import random_rotations
    rot = Pose.identity().rotations.copy()
    base = forward_kinematics(template_body, Pose(rot, np.zeros(3)))
    j = 16  # left shoulder
    rot[j] = rot6d_encode(random_rotations(1, rng)[0])
    moved = forward_kinematics(template_body, Pose(rot, np.zeros(3)))
    descendants = {j}
    for k in range(NUM_JOINTS):
        if template_body.skeleton.parent[k] in descendants:
            descendants.add(k)
    others = sorted(set(range(NUM_JOINTS)) - descendants)
    assert np.array_equal(moved.position[others], base.position[others])


def test_uniform_scale_equivariance_exact(template_body, half_body, rng):
    from shapemocap.rotations import random_rotations
    mats = random_rotations(NUM_JOINTS, rng)
    tran = np.array([0.3, 0.1, -0.2])
    _, p_full = forward_kinematics_batch(template_body, mats, tran)
    _, p_half = forward_kinematics_batch(half_body, mats, 0.5 * tran)
    assert np.array_equal(p_half, 0.5 * p_full)


def test_skinning_identity_returns_rest(template_body):
    tf = forward_kinematics(template_body, Pose.identity())
    v = skin_vertices(template_body, tf)
    assert np.allclose(v, template_body.vertices_rest, atol=1e-12)


def test_skinning_rigid_vertex_rotates_with_bone(template_body):
    # the four sole vertices carry weight 1 on their bone
    idx = template_body.foot_vertex_indices[0]
    bone = template_body.vertex_bone[idx]
    assert template_body.skin_weights[idx, bone] == 1.0
    rot = Pose.identity().rotations.copy()
    R = rotation_about([1, 0, 0], np.pi / 2)
    rot[bone] = rot6d_encode(R)
    tf = forward_kinematics(template_body, Pose(rot, np.zeros(3)))
    v = skin_vertices(template_body, tf)
    rest_j = template_body.rest_joint_positions()[bone]
    # rigid image computed by hand: rotate about the (unmoved) bone joint
    expected = R @ (template_body.vertices_rest[idx] - rest_j) + tf.position[bone]
    assert np.allclose(v[idx], expected, atol=1e-12)


def test_skinning_5050_blend_is_mean(template_body):
    w = template_body.skin_weights
    cand = np.flatnonzero(np.isclose(w.max(axis=1), 0.5, atol=0.2))
    idx = cand[0]
    joints = np.flatnonzero(w[idx])
    tf = forward_kinematics(template_body, Pose.identity())
    rot = Pose.identity().rotations.copy()
    # rotating nothing: blend of identical rigid images equals each image
    v = skin_vertices(template_body, tf)
    rest_j = template_body.rest_joint_positions()
    imgs = [tf.rotation[j] @ (template_body.vertices_rest[idx] - rest_j[j])
            + tf.position[j] for j in joints]
    blended = sum(w[idx, j] * img for j, img in zip(joints, imgs))
    assert np.allclose(v[idx], blended, atol=1e-12)


def test_skinning_partition_of_unity_rigid_motion(template_body, rng):
    from shapemocap.body import JointTransforms
    from shapemocap.rotations import random_rotations
    Q = random_rotations(1, rng)[0]
    t = np.array([0.4, 1.0, -0.3])
    rest = forward_kinematics(template_body, Pose.identity())
    moved = JointTransforms(rotation=np.einsum("ab,jbc->jac", Q, rest.rotation),
                            position=rest.position @ Q.T + t)
    v = skin_vertices(template_body, moved)
    expected = template_body.vertices_rest @ Q.T + t
    assert np.abs(v - expected).max() < 1e-10


def test_foot_vertices_topology_and_ground(template_body, half_body):
    idx_t = foot_vertices(template_body)
    idx_h = foot_vertices(half_body)
    assert len(set(idx_t.tolist())) == 4
    assert np.array_equal(idx_t, idx_h)
    ys = template_body.vertices_rest[idx_t, 1]
    assert np.all(np.abs(ys) < 0.02)


def test_foot_vertices_are_extremal(template_body):
    l_toe, l_heel, r_toe, r_heel = foot_vertices(template_body)
    vb = template_body.vertex_bone
    left = np.flatnonzero((vb == 7) | (vb == 10))
    right = np.flatnonzero((vb == 8) | (vb == 11))
    z = template_body.vertices_rest[:, 2]
    assert l_toe == left[np.argmax(z[left])]
    assert l_heel == left[np.argmin(z[left])]
    assert r_toe == right[np.argmax(z[right])]
    assert r_heel == right[np.argmin(z[right])]


def test_vertex_near_dominant_bone(template_body):
    from shapemocap.body import _capsule_segments, _shape_offsets_and_radii
    from shapemocap.body import _point_segment_distance
    offsets, radii, ext = _shape_offsets_and_radii(template_body.shape)
    starts, ends = _capsule_segments(template_body.skeleton, radii, ext)
    dom = template_body.skin_weights.argmax(axis=1)
    rmax = template_body.capsule_radius.max()
    for i, j in enumerate(dom):
        d = _point_segment_distance(template_body.vertices_rest[i:i + 1],
                                    starts[j], ends[j])[0]
        assert d <= rmax + 1e-9
