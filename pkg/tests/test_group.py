import numpy as np
import pytest
from hypothesis import given, strategies as st

from eqvslam.geometry import Pose, RigidVelocity, skew, so3_exp
from eqvslam.group import (
    DomainError, GroupElement, TotalState, action_output, action_state, group_identity, inverse,
    lift, lift_condition_check, multiply, output,
)
from _util import group_element, pose, total_state, unit, velocity

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(0, 6)


def close(x1: GroupElement, x2: GroupElement, tol=1e-12):
    return (np.abs(x1.A.as_matrix() - x2.A.as_matrix()).max() < tol
            and np.abs(x1.Q - x2.Q).max(initial=0) < tol and np.abs(x1.a - x2.a).max(initial=0) < tol)


def same_state(s1: TotalState, s2: TotalState, tol=1e-12):
    return (np.abs(s1.P.as_matrix() - s2.P.as_matrix()).max() < tol
            and np.abs(s1.p - s2.p).max(initial=0) < tol)


def test_identity_with_no_landmarks():
    e = group_identity(0)
    assert e.n == 0 and e.Q.shape == (0, 3, 3)
    np.testing.assert_array_equal(e.A.as_matrix(), np.eye(4))


@given(seeds, sizes)
def test_group_axioms(seed, n):
    rng = np.random.default_rng(seed)
    x, y, z = (group_element(rng, n) for _ in range(3))
    e = group_identity(n)
    assert close(multiply(x, e), x) and close(multiply(e, x), x)
    assert close(multiply(multiply(x, y), z), multiply(x, multiply(y, z)))
    assert close(multiply(x, inverse(x)), e) and close(multiply(inverse(x), x), e)
    assert close(inverse(inverse(x)), x)
    multiply(x, y).validate(1e-9)


def test_scale_components_multiply_and_invert():
    x = GroupElement(Pose.identity(), np.eye(3)[None], [2.0])
    y = GroupElement(Pose.identity(), np.eye(3)[None], [3.0])
    assert (x @ y).a[0] == 6.0
    assert x.inverse().a[0] == 0.5
    assert close(inverse(group_identity(2)), group_identity(2))


def test_mismatched_counts_rejected():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        multiply(group_element(rng, 2), group_element(rng, 3))
    with pytest.raises(ValueError):
        action_output(group_element(rng, 2), unit(rng, 3))


def test_action_hand_example():
    x = GroupElement(Pose.identity(), np.eye(3)[None], [2.0])
    xi = TotalState(Pose.identity(), [[0.0, 0.0, 4.0]])
    np.testing.assert_allclose(action_state(x, xi).p, [[0.0, 0.0, 2.0]])


@given(seeds, sizes)
def test_state_action_is_a_right_action(seed, n):
    rng = np.random.default_rng(seed)
    xi = total_state(rng, n)
    x1, x2 = group_element(rng, n), group_element(rng, n)
    assert same_state(action_state(group_identity(n), xi), xi)
    lhs = action_state(x1, action_state(x2, xi))
    rhs = action_state(multiply(x2, x1), xi)
    assert same_state(lhs, rhs, 1e-10 * (1 + np.abs(xi.p).max(initial=1)))


def test_output_action_hand_example():
    q = so3_exp([0, 0, np.pi / 2])
    x = GroupElement(Pose.identity(), q[None], [1.0])
    np.testing.assert_allclose(action_output(x, [[1.0, 0.0, 0.0]]), [[0.0, -1.0, 0.0]], atol=1e-15)


@given(seeds, sizes)
def test_output_action_is_a_right_action(seed, n):
    rng = np.random.default_rng(seed)
    y = unit(rng, n)
    x1, x2 = group_element(rng, n), group_element(rng, n)
    np.testing.assert_array_equal(action_output(group_identity(n), y), y)
    lhs = action_output(x1, action_output(x2, y))
    np.testing.assert_allclose(lhs, action_output(multiply(x2, x1), y), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(lhs, axis=1), 1.0, atol=1e-14)


def test_output_examples():
    xi = TotalState(Pose.identity(), [[0.0, 0.0, 1.0]])
    np.testing.assert_array_equal(output(xi), [[0.0, 0.0, 1.0]])
    with pytest.raises(DomainError):
        output(TotalState(Pose.identity(), [[0.0, 0.0, 1e-8]]))


@given(seeds, sizes)
def test_output_is_invariant_to_reference_frame(seed, n):
    rng = np.random.default_rng(seed)
    xi = total_state(rng, n)
    s = pose(rng)
    moved = TotalState(s.inverse() @ xi.P, (xi.p - s.x) @ s.R)
    np.testing.assert_allclose(output(moved), output(xi), atol=1e-12)


@given(seeds, sizes)
def test_output_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    xi, x = total_state(rng, n), group_element(rng, n)
    np.testing.assert_allclose(output(action_state(x, xi)), action_output(x, output(xi)), atol=1e-12)


def test_lift_examples():
    xi = TotalState(Pose.identity(), [[0.0, 0.0, 2.0]])
    lam = lift(xi, RigidVelocity([0, 0, 0], [2.0, 0, 0]))
    np.testing.assert_allclose(lam.W, [[0.0, 1.0, 0.0]])
    np.testing.assert_allclose(lam.w, [0.0])
    np.testing.assert_allclose(lam.W_matrices()[0], skew([0.0, 1.0, 0.0]))

    xi = TotalState(Pose.identity(), [[0.0, 0.0, 1.0]])
    lam = lift(xi, RigidVelocity([0, 0, 0], [0, 0, 3.0]))
    np.testing.assert_allclose(lam.W, [[0.0, 0.0, 0.0]])
    np.testing.assert_allclose(lam.w, [3.0])


@given(seeds)
def test_pure_rotation_lift(seed):
    rng = np.random.default_rng(seed)
    xi = total_state(rng, 4)
    w = rng.normal(size=3)
    lam = lift(xi, RigidVelocity(w, [0, 0, 0]))
    np.testing.assert_allclose(lam.W, np.tile(w, (4, 1)), atol=1e-15)
    np.testing.assert_array_equal(lam.w, 0.0)


def test_lift_near_colocation_is_rejected():
    xi = TotalState(Pose.identity(), [[0.0, 0.0, 1e-7]])
    with pytest.raises(DomainError):
        lift(xi, RigidVelocity([0, 0, 0], [1, 0, 0]))


def test_lift_condition_stationary_and_landmark_part():
    rng = np.random.default_rng(7)
    xi = total_state(rng, 5)
    assert lift_condition_check(xi, RigidVelocity.zero()) < 1e-12
    _, parts = lift_condition_check(xi, velocity(rng), return_parts=True)
    assert parts["landmarks"] < 1e-6


def test_lift_condition_random():
    rng = np.random.default_rng(8)
    worst = max(lift_condition_check(total_state(rng, 5, min_range=1.0), velocity(rng)) for _ in range(50))
    assert worst < 1e-6


def test_lift_condition_converges_quadratically():
    rng = np.random.default_rng(9)
    xi, u = total_state(rng, 3, min_range=1.0), velocity(rng)
    d = [lift_condition_check(xi, u, h) for h in (1e-2, 1e-3)]
    assert 60 < d[0] / d[1] < 140
    with pytest.raises(ValueError):
        lift_condition_check(xi, u, 0.0)
