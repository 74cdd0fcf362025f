import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_arm import JointState, StructuralParams, body_height, full_fk, parallel_fk, serial_fk, validate_state
from hybrid_arm.kinematics import DomainError, fk_positions, platform_height, separation_for_height
from oracles import arm_fk, chain_fk, platform_translation, random_valid_states


def test_parallel_fk_upright(params):
    pose = parallel_fk(100.0, 0.0, params)
    assert pose.translation.tolist() == [130.0, 0.0, 483.0]
    assert np.array_equal(pose.rotation, np.eye(3))


def test_parallel_fk_full_split(params):
    pose = parallel_fk(0.0, 786.0, params)
    assert pose.translation[2] == params.h + params.e1 == 90.0


def test_parallel_fk_matches_direct_formula(params):
    assert np.allclose(parallel_fk(200.0, 300.0, params).translation, platform_translation(200.0, 300.0, params), atol=1e-12, rtol=0)


def test_parallel_fk_outside_domain(params):
    with pytest.raises(DomainError):
        parallel_fk(0.0, 800.0, params)


def test_serial_fk_zero(params):
    assert np.allclose(serial_fk(0, 0, 0, 0, params).translation, [305.0, -118.0, 0.0], atol=1e-12)


def test_serial_fk_theta2_quarter_turn(params):
    assert np.allclose(serial_fk(0, math.pi / 2, 0, 0, params).translation, [118.0, 305.0, 0.0], atol=1e-12)


def test_serial_rotations_orthonormal(params):
    rng = np.random.default_rng(11)
    for t in rng.uniform(-math.pi, math.pi, (1000, 4)):
        r = serial_fk(*t, params).rotation
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0)
        assert abs(np.linalg.det(r) - 1) < 1e-9


def test_full_fk_composition(params):
    pose = full_fk(JointState(100, 0, 0, 0, 0, 0), params)
    assert np.allclose(pose.translation, [435.0, -118.0, 483.0], atol=1e-12)


def test_full_fk_is_product(params):
    rng = np.random.default_rng(5)
    for s in random_valid_states(params, 200, rng):
        q = JointState(*s)
        expected = parallel_fk(q.a, q.b, params).matrix() @ serial_fk(*q.thetas, params).matrix()
        assert np.allclose(full_fk(q, params).matrix(), expected, atol=1e-12, rtol=0)


def test_generic_dh_oracle(params):
    rng = np.random.default_rng(21)
    for s in random_valid_states(params, 1000, rng):
        got = full_fk(JointState(*s), params).matrix()
        assert np.max(np.abs(got[:3, 3] - arm_fk(s, params)[:3, 3])) < 1e-9
        assert np.max(np.abs(got[:3, :3] - arm_fk(s, params)[:3, :3])) < 1e-12


def test_vectorised_fk_matches(params):
    rng = np.random.default_rng(2)
    states = np.array(random_valid_states(params, 500, rng))
    expected = np.array([full_fk(JointState(*s), params).translation for s in states])
    assert np.allclose(fk_positions(states, params), expected, atol=1e-9, rtol=0)


def test_theta4_does_not_move_tcp(params):
    base = chain_fk([0.3, -0.4, 0.5, 0.0], params)[:3, 3]
    for t4 in np.linspace(-3, 3, 13):
        assert np.allclose(serial_fk(0.3, -0.4, 0.5, t4, params).translation, base, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 400), st.floats(60, 400), st.floats(-300, 300), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_translation_equivariance(a, b, delta, t):
    p = StructuralParams()
    q = JointState(a, b, *t)
    moved = full_fk(q.replace(a=a + delta), p)
    base = full_fk(q, p)
    assert np.allclose(moved.translation - base.translation, [delta, 0, 0], atol=1e-9, rtol=0)
    assert np.array_equal(moved.rotation, base.rotation)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 786))
def test_platform_never_rotates_and_height_bounded(b):
    p = StructuralParams(b_min=0.0)
    pose = parallel_fk(0.0, b, p)
    assert np.array_equal(pose.rotation, np.eye(3))
    assert p.h + p.e1 <= pose.translation[2] <= p.d1 + p.h + p.e1


def test_body_height_extremes(open_params):
    p = open_params
    assert body_height(JointState(0, p.b_max), p) == p.h + p.e1 + p.stack_height
    assert body_height(JointState(0, p.e2 - p.e3), p) == p.d1 + p.h + p.e1 + p.stack_height


def test_body_height_apex_clamped_to_b_min(params):
    b = max(params.b_min, params.e2 - params.e3)
    expected = math.sqrt(params.d1**2 - ((b + params.e3 - params.e2) / 2) ** 2) + params.h + params.e1 + params.stack_height
    assert body_height(JointState(0, b), params) == pytest.approx(expected, abs=1e-12)


def test_body_height_decreasing(params):
    heights = [body_height(JointState(0, b), params) for b in (100, 300, 500)]
    expected = [platform_translation(0, b, params)[2] + params.d2 for b in (100, 300, 500)]
    assert heights == pytest.approx(expected, abs=1e-12)
    assert heights[0] > heights[1] > heights[2]


@settings(max_examples=200, deadline=None)
@given(st.floats(90, 483))
def test_separation_inverts_height(z):
    p = StructuralParams(b_min=0.0)
    b = separation_for_height(z, p)
    assert platform_height(b, p) == pytest.approx(z, abs=1e-9)


def test_fk_finite_iff_valid_domain(params):
    rng = np.random.default_rng(8)
    for s in random_valid_states(params, 100, rng):
        q = JointState(*s)
        assert validate_state(q, params)
        assert np.all(np.isfinite(full_fk(q, params).matrix()))
