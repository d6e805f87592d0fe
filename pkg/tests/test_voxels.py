import numpy as np
import pytest

from shapemocap.body import ShapeParams, build_body
from shapemocap.rotations import hat, random_rotations
from shapemocap.voxels import (MassPropertyError, VoxelCloud,
                               compute_mass_properties, joint_com,
                               joint_inertia, joint_mass, point_mass,
                               points_inside_capsules, voxelize)


def box_cloud(a, b, c, res, joint=0, center=(0.0, 0.0, 0.0)):
    """Uniform grid cloud filling an a x b x c box, all weight on one joint."""
    axes = [np.arange(-e / 2 + res / 2, e / 2, res) for e in (a, b, c)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1) + np.asarray(center)
    w = np.zeros((len(pts), 24))
    w[:, joint] = 1.0
    return VoxelCloud(points=pts, weights=w, res=res)


def test_capsule_volume_oracle():
    r, L, res = 0.05, 0.3, 0.01
    pts = points_inside_capsules([[0, 0, 0]], [[0, 0, L]], [r], res)
    sampled = len(pts) * res ** 3
    analytic = np.pi * r ** 2 * L + 4.0 / 3.0 * np.pi * r ** 3
    assert abs(sampled - analytic) / analytic < 0.05


def test_halved_resolution_multiplies_count_by_8():
    r, L = 0.05, 0.3
    n1 = len(points_inside_capsules([[0, 0, 0]], [[0, 0, L]], [r], 0.01))
    n2 = len(points_inside_capsules([[0, 0, 0]], [[0, 0, L]], [r], 0.005))
    assert abs(n2 / n1 - 8.0) < 0.8


def test_inner_points_lie_inside():
    r, L = 0.04, 0.2
    pts = points_inside_capsules([[0, 0, 0]], [[0, 0, L]], [r], 0.01)
    t = np.clip(pts[:, 2], 0.0, L)
    d = np.linalg.norm(pts - np.stack([np.zeros_like(t)] * 2 + [t], axis=1), axis=1)
    assert np.all(d <= r + 1e-12)


def test_voxelize_res_range(template_body):
    with pytest.raises(MassPropertyError):
        voxelize(template_body, res=0.004)
    with pytest.raises(MassPropertyError):
        voxelize(template_body, res=0.06)


def test_voxel_weights_row_stochastic(template_body):
    cloud = voxelize(template_body, res=0.03)
    assert np.allclose(cloud.weights.sum(axis=1), 1.0, atol=1e-12)
    assert cloud.weights.min() >= 0.0


def test_point_mass_arithmetic():
    assert point_mass(1.0, 0.02, 1000.0) == pytest.approx(0.008, abs=1e-15)
    assert point_mass(0.0, 0.02, 1000.0) == 0.0
    assert (point_mass(0.5, 0.02, 1000.0) + point_mass(0.5, 0.02, 1000.0)
            == pytest.approx(point_mass(1.0, 0.02, 1000.0), abs=1e-15))
    with pytest.raises(MassPropertyError):
        point_mass(1.5, 0.02, 1000.0)


def test_joint_mass_uniform_box_oracle():
    cloud = box_cloud(0.1, 0.1, 0.1, 0.01)
    m = joint_mass(cloud, density=1000.0)
    assert abs(m[0] - 1.0) < 0.05
    assert np.all(m[1:] == 0.0)


def test_joint_mass_empty_cloud():
    cloud = VoxelCloud(points=np.zeros((0, 3)), weights=np.zeros((0, 24)),
                       res=0.01)
    assert np.all(joint_mass(cloud) == 0.0)


def test_template_mass_sanity_band(template_body):
    props = compute_mass_properties(template_body, res=0.02, density=1000.0)
    assert 50.0 <= props.total_mass <= 90.0


def test_mass_conservation_exact(template_body):
    cloud = voxelize(template_body, res=0.025)
    m = joint_mass(cloud, density=1000.0)
    total = 1000.0 * len(cloud.points) * cloud.res ** 3
    assert abs(m.sum() - total) / total < 1e-9


def test_joint_com_symmetric_box():
    res = 0.01
    cloud = box_cloud(0.1, 0.08, 0.12, res)
    com = joint_com(cloud, np.zeros((24, 3)), joints=[0])
    assert np.linalg.norm(com[0]) < res / 2


def test_joint_com_single_and_paired_points():
    w = np.zeros((1, 24)); w[0, 0] = 1.0
    cloud = VoxelCloud(points=np.array([[0.0, 0.1, 0.0]]), weights=w, res=0.01)
    com = joint_com(cloud, np.zeros((24, 3)), joints=[0])
    assert np.allclose(com[0], [0.0, 0.1, 0.0], atol=1e-15)

    w2 = np.zeros((2, 24)); w2[:, 0] = 1.0
    cloud2 = VoxelCloud(points=np.array([[0.0, 0.1, 0.0], [0.0, -0.1, 0.0]]),
                        weights=w2, res=0.01)
    com2 = joint_com(cloud2, np.zeros((24, 3)), joints=[0])
    assert np.allclose(com2[0], 0.0, atol=1e-15)


def test_joint_com_zero_mass_signaled():
    w = np.zeros((1, 24)); w[0, 0] = 1.0
    cloud = VoxelCloud(points=np.zeros((1, 3)), weights=w, res=0.01)
    with pytest.raises(MassPropertyError):
        joint_com(cloud, np.zeros((24, 3)))


def test_point_mass_inertia_exact():
    # single mass at r = (0, 0.1, 0) about the joint (com passed as zero)
    w = np.zeros((1, 24)); w[0, 0] = 1.0
    cloud = VoxelCloud(points=np.array([[0.0, 0.1, 0.0]]), weights=w, res=0.02)
    m = joint_mass(cloud, density=1000.0)[0]
    I = joint_inertia(cloud, np.zeros((24, 3)), np.zeros((24, 3)),
                      density=1000.0)[0]
    expected = np.diag([0.01 * m, 0.0, 0.01 * m])
    assert np.abs(I - expected).max() < 1e-12


def test_box_inertia_oracle():
    a, b, c = 0.2, 0.1, 0.15
    res = min(a, b, c) / 10.0
    cloud = box_cloud(a, b, c, res)
    m = joint_mass(cloud, density=1000.0)[0]
    com = joint_com(cloud, np.zeros((24, 3)), density=1000.0, joints=[0])
    I = joint_inertia(cloud, com, np.zeros((24, 3)), density=1000.0)[0]
    expected = m / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])
    assert np.abs(np.diag(I) - np.diag(expected)).max() \
        < 0.03 * np.diag(expected).max()
    off = I - np.diag(np.diag(I))
    assert np.abs(off).max() < 1e-9 * m


def test_inertia_psd_and_symmetric(template_body):
    props = compute_mass_properties(template_body, res=0.03)
    for I in props.inertia:
        assert np.allclose(I, I.T, atol=1e-12)
        assert np.linalg.eigvalsh(I).min() >= -1e-12


def test_cross_product_identity(rng):
    r = rng.normal(size=(1000, 3))
    H = hat(r)
    lhs = H @ np.swapaxes(H, -1, -2)
    r2 = np.einsum("nd,nd->n", r, r)
    rhs = r2[:, None, None] * np.eye(3) - np.einsum("na,nb->nab", r, r)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_parallel_axis_consistency(template_body):
    props = compute_mass_properties(template_body, res=0.025)
    cloud = voxelize(template_body, res=0.025)
    joints = template_body.rest_joint_positions()
    I_joint = joint_inertia(cloud, np.zeros((24, 3)), joints)
    for j in range(24):
        c = props.com[j]
        m = props.mass[j]
        shifted = props.inertia[j] + m * ((c @ c) * np.eye(3) - np.outer(c, c))
        denom = max(np.abs(I_joint[j]).max(), 1e-12)
        assert np.abs(I_joint[j] - shifted).max() / denom < 1e-9


def test_rigid_rotation_equivariance(template_body, rng):
    cloud = voxelize(template_body, res=0.03)
    joints = template_body.rest_joint_positions()
    com = joint_com(cloud, joints)
    I = joint_inertia(cloud, com, joints)
    Q = random_rotations(1, rng)[0]
    cloud_rot = VoxelCloud(points=cloud.points @ Q.T, weights=cloud.weights,
                           res=cloud.res)
    joints_rot = joints @ Q.T
    com_rot = joint_com(cloud_rot, joints_rot)
    I_rot = joint_inertia(cloud_rot, com_rot, joints_rot)
    for j in range(24):
        expected = Q @ I[j] @ Q.T
        denom = max(np.abs(expected).max(), 1e-12)
        assert np.abs(I_rot[j] - expected).max() / denom < 1e-9


def test_half_scale_mass_ratio(template_body):
    half = build_body(ShapeParams(height_scale=0.5))
    m_full = compute_mass_properties(template_body, res=0.01).total_mass
    m_half = compute_mass_properties(half, res=0.01).total_mass
    assert abs(m_half / m_full - 0.125) < 0.1 * 0.125


def test_resolution_convergence(template_body):
    p2 = compute_mass_properties(template_body, res=0.02)
    p1 = compute_mass_properties(template_body, res=0.01)
    rel = np.abs(p2.mass - p1.mass) / p1.mass
    assert rel.max() < 0.10


def test_girth_beta_increases_mass(template_body):
    beta = np.zeros(10); beta[9] = 1.0
    fat = build_body(ShapeParams(beta=beta))
    m0 = compute_mass_properties(template_body, res=0.02).total_mass
    m1 = compute_mass_properties(fat, res=0.02).total_mass
    assert m1 > m0
