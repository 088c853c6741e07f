import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from flagstat import (
    FlagSignature,
    RigidMotion,
    average_motions,
    average_rotations,
    contract,
    expand,
    flag_to_so4,
    make_flag,
    pose_error,
    so4_to_flag,
)
from flagstat.errors import ContractionSingularity, InvalidInput, NotOrthonormal
from flagstat.motion import average_motions_detailed, orthogonality_defect, rotation_angle
from flagstat.synthlab import MotionClusterSpec, gen_motion_cluster, random_motion, random_rotation
from flagstat.numerics import RngStream


def test_rigid_motion_validation():
    with pytest.raises(NotOrthonormal):
        RigidMotion(2 * np.eye(3), np.zeros(3))
    with pytest.raises(NotOrthonormal):
        RigidMotion(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InvalidInput):
        RigidMotion(np.eye(3), np.zeros(2))
    g = RigidMotion.identity()
    assert np.array_equal(g.matrix(), np.eye(4))


def test_contract_identity_and_defect():
    assert np.allclose(contract(RigidMotion.identity()), np.eye(4))
    gen = np.random.default_rng(0)
    for _ in range(20):
        m = contract(random_motion(gen, 3.0), 0.7)
        assert orthogonality_defect(m) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 10))
def test_contraction_round_trip(seed, lam):
    gen = np.random.default_rng(seed)
    g = random_motion(gen, 3 * lam)
    back = expand(contract(g, lam), lam)
    assert rotation_angle(g.rotation.T @ back.rotation) < 1e-8
    assert np.linalg.norm(back.translation - g.translation) < 1e-8 * max(1.0, lam)


def test_expand_horizon_raises():
    m = np.diag([1.0, 1.0, -1.0, -1.0])
    m = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
    with pytest.raises(ContractionSingularity):
        expand(m)


def test_flag_so4_round_trip():
    gen = np.random.default_rng(3)
    for _ in range(50):
        q = np.linalg.qr(gen.standard_normal((4, 4)))[0]
        if np.linalg.det(q) < 0:
            q[:, 3] *= -1
        assert np.max(np.abs(flag_to_so4(so4_to_flag(q)) - q)) < 1e-10


def test_flag_to_so4_needs_complete_flag():
    with pytest.raises(InvalidInput):
        flag_to_so4(make_flag(np.eye(4)[:, :3], FlagSignature((1, 3), 4)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rotation_angle_matches_quaternion_oracle(seed):
    gen = np.random.default_rng(seed)
    r = random_rotation(gen)
    assert rotation_angle(r) == pytest.approx(Rotation.from_matrix(r).magnitude(), abs=1e-9)


def test_rotation_angle_small_and_pi():
    assert rotation_angle(Rotation.from_rotvec([1e-12, 0, 0]).as_matrix()) == pytest.approx(1e-12, rel=1e-6)
    assert rotation_angle(np.diag([1.0, -1.0, -1.0])) == pytest.approx(math.pi)


def test_pose_error():
    a = RigidMotion.identity()
    b = RigidMotion(Rotation.from_rotvec([0, 0, math.pi / 2]).as_matrix(), [3.0, 4.0, 0.0])
    assert pose_error(a, b) == pytest.approx(0.5 + 5.0)
    assert pose_error(a, b, lambda_t=0.1) == pytest.approx(0.5 + 0.5)
    assert pose_error(b, b) == 0.0


def test_average_single_and_identity():
    g = random_motion(np.random.default_rng(1), 1.0)
    for q in (1, 2):
        assert pose_error(average_motions([g], q=q), g) < 1e-10
        assert pose_error(average_motions([RigidMotion.identity()] * 10, q=q), RigidMotion.identity()) < 1e-10


def test_average_recovers_noise_free_cluster():
    center, motions = gen_motion_cluster(MotionClusterSpec(50, 0.0, 0.0, 0.0, 1.0, RngStream(5)))
    for q in (1, 2):
        assert pose_error(average_motions(motions, q=q), center) <= 1e-6


def test_median_resists_outliers():
    center, motions = gen_motion_cluster(MotionClusterSpec(100, 5.0, 0.05, 0.3, 1.0, RngStream(6)))
    mean = average_motions(motions, q=2)
    med = average_motions(motions, q=1)
    assert pose_error(med, center) < pose_error(mean, center)


def test_average_is_equivariant_to_left_rotation():
    _, motions = gen_motion_cluster(MotionClusterSpec(30, 10.0, 0.0, 0.0, 1.0, RngStream(7)))
    motions = [RigidMotion(g.rotation, np.zeros(3)) for g in motions]
    r0 = random_rotation(np.random.default_rng(8))
    a = average_rotations([g.rotation for g in motions])
    b = average_rotations([r0 @ g.rotation for g in motions])
    assert rotation_angle((r0 @ a).T @ b) < 1e-7


def test_average_rotations_close_to_chordal_l2_mean():
    # chordal L2 rotation mean oracle: polar factor of the summed matrices
    gen = np.random.default_rng(9)
    base = random_rotation(gen)
    rots = [Rotation.from_rotvec(0.1 * gen.standard_normal(3)).as_matrix() @ base for _ in range(40)]
    u, _, vt = np.linalg.svd(sum(rots))
    oracle = u @ np.diag([1, 1, np.linalg.det(u @ vt)]) @ vt
    avg = average_rotations(rots)
    assert rotation_angle(avg.T @ oracle) < 0.01
    assert rotation_angle(avg.T @ base) < 0.05


def test_average_motions_input_checks():
    with pytest.raises(InvalidInput):
        average_motions([])
    with pytest.raises(InvalidInput):
        average_motions([RigidMotion.identity()], q=3)
    with pytest.raises(InvalidInput):
        average_motions([RigidMotion.identity()], lam=0)
    res = average_motions_detailed([RigidMotion.identity()] * 3)
    assert orthogonality_defect(res.so4) < 1e-12
