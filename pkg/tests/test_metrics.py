import numpy as np
import pytest

from shapemocap import config
from shapemocap.body import ShapeParams, build_body
from shapemocap.metrics import (MotionComparison, angular_error, drift_curve,
                                jitter, joint_position_error, mesh_error,
                                mesh_error_tpose, sip_error)
from shapemocap.motions import MotionSequence, stand
from shapemocap.rotations import rot6d_encode, rotation_about


def static_motion(frames=60, translation=None):
    tr = np.zeros((frames, 3)) if translation is None else translation
    return MotionSequence(rotations=stand(frames), translation=tr)


def cmp_of(pred, truth, body):
    return MotionComparison(predicted=pred, truth=truth,
                            predicted_body=body, truth_body=body)


def test_identical_motions_zero_metrics(template_body):
    m = static_motion()
    c = cmp_of(m, m, template_body)
    assert sip_error(c) == 0.0
    assert angular_error(c) == 0.0
    assert joint_position_error(c) == 0.0
    assert mesh_error(c) == 0.0
    assert np.all(drift_curve(c)[:, 1] == 0.0)


def test_sip_30_degree_offset(template_body):
    truth = static_motion(30)
    rot = stand(30)
    off = rotation_about([0, 0, 1], np.radians(30.0))
    for j in (1, 2, 16, 17):
        rot[:, j] = rot6d_encode(np.tile(off, (30, 1, 1)))
    pred = MotionSequence(rotations=rot, translation=np.zeros((30, 3)))
    c = cmp_of(pred, truth, template_body)
    assert abs(sip_error(c) - 30.0) < 1e-6
    # global rotations inherit: 4 SIP joints + 12 descendants, all at 30
    assert abs(angular_error(c) - 16 * 30.0 / 24.0) < 1e-6


def test_angular_uniform_and_single_joint(template_body):
    truth = static_motion(10)
    # root offset rotates every global rotation uniformly
    rot = stand(10)
    rot[:, 0] = rot6d_encode(np.tile(rotation_about([0, 1, 0],
                                                    np.radians(10.0)), (10, 1, 1)))
    pred = MotionSequence(rotations=rot, translation=np.zeros((10, 3)))
    assert abs(angular_error(cmp_of(pred, truth, template_body)) - 10.0) < 1e-6
    # one leaf joint offset by 24 degrees -> mean error 1
    rot2 = stand(10)
    rot2[:, 22] = rot6d_encode(np.tile(rotation_about([0, 0, 1],
                                                      np.radians(24.0)), (10, 1, 1)))
    pred2 = MotionSequence(rotations=rot2, translation=np.zeros((10, 3)))
    assert abs(angular_error(cmp_of(pred2, truth, template_body)) - 1.0) < 1e-6


def test_sip_ignores_wrists(template_body):
    truth = static_motion(10)
    rot = stand(10)
    off = rotation_about([1, 0, 0], 0.7)
    for j in (20, 21):
        rot[:, j] = rot6d_encode(np.tile(off, (10, 1, 1)))
    pred = MotionSequence(rotations=rot, translation=np.zeros((10, 3)))
    assert sip_error(cmp_of(pred, truth, template_body)) == 0.0


def test_angular_symmetry(template_body, rng):
    from shapemocap.rotations import random_rotations
    rot_a = stand(5)
    rot_b = stand(5)
    rot_b[:, 3] = rot6d_encode(random_rotations(5, rng))
    ma = MotionSequence(rotations=rot_a, translation=np.zeros((5, 3)))
    mb = MotionSequence(rotations=rot_b, translation=np.zeros((5, 3)))
    ab = angular_error(cmp_of(ma, mb, template_body))
    ba = angular_error(cmp_of(mb, ma, template_body))
    assert abs(ab - ba) < 1e-12


def test_rigid_offset_removed_by_root_alignment(template_body):
    truth = static_motion(20)
    shifted = MotionSequence(rotations=stand(20),
                             translation=np.tile([0.05, 0.0, 0.0], (20, 1)))
    c = cmp_of(shifted, truth, template_body)
    assert joint_position_error(c) < 1e-9
    assert mesh_error(c) < 1e-9


def test_joint_error_single_joint_hand_case(template_body):
    # bend the left elbow 90 degrees: wrist moves from (0.69, 1.325, 0) to
    # (0.44, 1.575, 0), i.e. by sqrt(0.25^2 + 0.25^2); hand (+0.08 along the
    # rotated forearm) moves from (0.77, 1.325) to (0.44, 1.655):
    # displacement sqrt(0.33^2 + 0.33^2).  Mean over 24 joints, in cm.
    truth = static_motion(8)
    rot = stand(8)
    rot[:, 18] = rot6d_encode(np.tile(rotation_about([0, 0, 1], np.pi / 2), (8, 1, 1)))
    pred = MotionSequence(rotations=rot, translation=np.zeros((8, 3)))
    d_wrist = np.hypot(0.25, 0.25)
    d_hand = np.hypot(0.33, 0.33)
    expected_cm = (d_wrist + d_hand) / 24.0 * 100.0
    err = joint_position_error(cmp_of(pred, truth, template_body))
    assert abs(err - expected_cm) < 1e-9


def test_mesh_error_body_mismatch(template_body):
    other = build_body(ShapeParams(height_scale=0.8))
    m = static_motion(6)
    c = MotionComparison(predicted=m, truth=m, predicted_body=template_body,
                         truth_body=other)
    # same vertex count here, so mesh error works across bodies; a custom
    # mismatched mesh must raise
    import dataclasses
    small = dataclasses.replace(other)
    object.__setattr__(small, "vertices_rest", other.vertices_rest[:10])
    object.__setattr__(small, "skin_weights", other.skin_weights[:10])
    c_bad = MotionComparison(predicted=m, truth=m,
                             predicted_body=template_body, truth_body=small)
    with pytest.raises(ValueError):
        mesh_error(c_bad)


def test_jitter_constant_velocity_zero(template_body):
    n = 40
    tr = np.zeros((n, 3))
    tr[:, 0] = np.arange(n) * 0.01
    m = static_motion(n, tr)
    assert jitter(m, template_body) < 1e-12


def test_jitter_sinusoid_oracle(template_body):
    # analytic: jerk of A sin(2 pi f t) has amplitude A (2 pi f)^3 and
    # mean |jerk| = A (2 pi f)^3 * 2 / pi
    A, f, n = 0.1, 1.0, 600
    t = np.arange(n) / config.FRAME_RATE
    tr = np.zeros((n, 3))
    tr[:, 1] = A * np.sin(2 * np.pi * f * t)
    m = static_motion(n, tr)
    expected = A * (2 * np.pi * f) ** 3 * (2 / np.pi) / 1e3
    assert abs(jitter(m, template_body) - expected) < 0.02 * expected


def test_jitter_noise_above_smoothed(template_body, rng):
    n = 120
    noise = rng.normal(scale=0.01, size=(n, 3))
    smooth = np.zeros((n, 3))
    jn = jitter(static_motion(n, noise), template_body)
    js = jitter(static_motion(n, smooth), template_body)
    assert jn > js


def test_jitter_short_sequence(template_body):
    with pytest.raises(ValueError):
        jitter(static_motion(3), template_body)


def test_mesh_error_tpose_cases():
    a = ShapeParams()
    assert mesh_error_tpose(a, a) == 0.0
    b = ShapeParams(height_scale=1.01)
    va = build_body(a).vertices_rest
    vb = build_body(b).vertices_rest
    direct = float(np.linalg.norm(va - vb, axis=-1).mean() * 100.0)
    assert abs(mesh_error_tpose(a, b) - direct) < 1e-12
    assert direct > 0.0


def test_mesh_error_tpose_symmetric_beta_flip():
    base = ShapeParams()
    for comp in (3, 5):
        plus = np.zeros(10); plus[comp] = 1.0
        minus = np.zeros(10); minus[comp] = -1.0
        ep = mesh_error_tpose(ShapeParams(beta=plus), base)
        em = mesh_error_tpose(ShapeParams(beta=minus), base)
        assert abs(ep - em) < 1e-9


def test_drift_curve_constant_offset(template_body):
    n = 50
    truth = static_motion(n)
    pred = static_motion(n, np.tile([0.1, 0.0, 0.0], (n, 1)))
    curve = drift_curve(cmp_of(pred, truth, template_body))
    assert np.allclose(curve[:, 1], 0.1, atol=1e-15)
    assert np.all(curve[:, 0] == 0.0)


def test_drift_curve_linear_closed_form(template_body):
    # truth moves at 1 m/s along x, prediction at 0.9 m/s: at ground-truth
    # traveled distance d the error is 0.1 * d
    n = 120
    t = np.arange(n) / config.FRAME_RATE
    tr_t = np.zeros((n, 3)); tr_t[:, 0] = t
    tr_p = np.zeros((n, 3)); tr_p[:, 0] = 0.9 * t
    curve = drift_curve(cmp_of(static_motion(n, tr_p), static_motion(n, tr_t),
                               template_body))
    assert np.abs(curve[:, 1] - 0.1 * curve[:, 0]).max() < 1e-9


def test_length_mismatch_rejected(template_body):
    with pytest.raises(ValueError):
        cmp_of(static_motion(10), static_motion(12), template_body)
