import numpy as np
import pytest
from hypothesis import given, strategies as st

from eqvslam.geometry import Pose, RigidVelocity, so3_exp
from eqvslam.group import TotalState, output
from eqvslam.observer import ObserverConfig, pe_metric
from eqvslam.simulation import (
    ScenarioConfig,
    VelocitySegment,
    measure,
    perturb_bearings,
    scenario_standard,
    simulate,
    true_pose_at,
    true_step,
)

from _util import total_state, unit, velocity


def test_zero_velocity_leaves_state_unchanged():
    rng = np.random.default_rng(0)
    xi = total_state(rng, 4)
    out = true_step(xi, RigidVelocity.zero(), 0.7)
    np.testing.assert_array_equal(out.P.R, xi.P.R)
    np.testing.assert_array_equal(out.P.x, xi.P.x)
    np.testing.assert_array_equal(out.p, xi.p)


def test_pure_translation_shifts_position():
    xi = TotalState(Pose.identity(), np.array([[0.0, 0.0, 5.0]]))
    out = true_step(xi, RigidVelocity((0, 0, 0), (1, 0, 0)), 1.0)
    np.testing.assert_allclose(out.P.x, [1.0, 0.0, 0.0], atol=1e-15)


def test_circle_scenario_traces_radius_three():
    sc = scenario_standard()
    xi = TotalState(sc.initial_pose(), sc.landmark_positions())
    u = sc.velocity(0.0)
    positions = [xi.P.x]
    for _ in range(400):
        xi = true_step(xi, u, sc.dt)
        positions.append(xi.P.x)
    pos = np.array(positions)
    # body x-axis starts along inertial x with yaw rate +0.5, so the centre sits 3 m along +y
    centre = np.array([3.0, 6.0, 5.0])
    np.testing.assert_allclose(np.linalg.norm(pos - centre, axis=1), 3.0, atol=1e-12)
    np.testing.assert_allclose(pos[:, 2], 5.0, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_landmarks_bit_identical_under_true_step(seed):
    rng = np.random.default_rng(seed)
    xi = total_state(rng, 3)
    p0 = xi.p.copy()
    for _ in range(5):
        xi = true_step(xi, velocity(rng), rng.uniform(0, 0.1))
    assert np.array_equal(xi.p, p0)


def test_orthonormality_drift_over_ten_thousand_steps():
    xi = TotalState(Pose.identity(), np.zeros((0, 3)))
    u = RigidVelocity((0.3, -0.7, 0.5), (1.5, 0.2, 0.0))
    for _ in range(10_000):
        xi = true_step(xi, u, 0.033)
    assert np.abs(xi.P.R.T @ xi.P.R - np.eye(3)).max() < 1e-12


def test_standard_preset_landmarks_and_initial_pose():
    sc = scenario_standard()
    p = sc.landmark_positions()
    assert p.shape == (5, 3)
    np.testing.assert_array_equal(p[:, 2], 0.0)
    np.testing.assert_array_equal(sc.initial_pose().R, np.eye(3))
    np.testing.assert_array_equal(sc.initial_pose().x, [3.0, 3.0, 5.0])
    assert sc.observer.k == 5.0 and sc.observer.alpha == 500.0 and sc.observer.d_init == 10.0


def test_fixed_seed_is_deterministic():
    np.testing.assert_array_equal(scenario_standard(3).landmark_positions(),
                                  scenario_standard(3).landmark_positions())
    assert not np.array_equal(scenario_standard(3).landmark_positions(),
                              scenario_standard(4).landmark_positions())


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(duration=-1.0)
    with pytest.raises(ValueError):
        ScenarioConfig(noise=-0.1)
    with pytest.raises(ValueError):
        ScenarioConfig(trajectory="schedule")


def test_noise_free_measurement_is_exact_output():
    rng = np.random.default_rng(1)
    xi = total_state(rng, 6)
    np.testing.assert_array_equal(measure(xi), output(xi))
    np.testing.assert_array_equal(measure(xi, 0.0, rng), output(xi))


def test_noise_keeps_unit_norm():
    rng = np.random.default_rng(2)
    y = perturb_bearings(unit(rng, 1000), 0.05, rng)
    np.testing.assert_allclose(np.linalg.norm(y, axis=1), 1.0, atol=1e-15)


def test_noise_mean_angle_matches_half_normal():
    rng = np.random.default_rng(3)
    sigma = 0.02
    y0 = unit(rng, 10_000)
    y = perturb_bearings(y0, sigma, rng)
    angle = np.arccos(np.clip(np.einsum("ni,ni->n", y, y0), -1, 1))
    expected = sigma * np.sqrt(2 / np.pi)
    assert abs(angle.mean() - expected) < 0.05 * expected


def test_noisy_measurement_needs_rng():
    xi = total_state(np.random.default_rng(4), 2)
    with pytest.raises(ValueError):
        measure(xi, 0.01)


def test_circle_scenario_is_persistently_exciting():
    sc = scenario_standard(duration=30.0)
    xi = TotalState(sc.initial_pose(), sc.landmark_positions())
    u = sc.velocity(0.0)
    times, ys = [], []
    for k in range(sc.n_steps + 1):
        times.append(k * sc.dt)
        ys.append(output(xi))
        xi = true_step(xi, u, sc.dt)
    ys = np.array(ys)
    v = np.tile(u.v, (len(times), 1))
    for i in range(ys.shape[1]):
        assert pe_metric(times, ys[:, i], v, window=5.0) > 0.1


def test_pe_metric_perpendicular_constant_velocity():
    t = np.linspace(0, 2, 21)
    y = np.tile([0.0, 0.0, 1.0], (21, 1))
    v = np.tile([1.5, 0.0, 0.0], (21, 1))
    assert pe_metric(t, y, v) == pytest.approx(1.5)
    assert pe_metric(t, y, v, window=0.5) == pytest.approx(1.5)


def test_true_pose_at_matches_stepping():
    segs = (VelocitySegment(0.0, (0, 0, 0.5), (1.5, 0, 0)), VelocitySegment(1.0, (0.2, 0, 0), (0, 1, 0)))
    sc = ScenarioConfig(trajectory="schedule", segments=segs, duration=2.0,
                        observer=ObserverConfig.simulation_preset(dt=0.1))
    xi = TotalState(sc.initial_pose(), sc.landmark_positions())
    for k in range(sc.n_steps):
        xi = true_step(xi, sc.velocity(k * sc.dt), sc.dt)
    P = true_pose_at(sc, 2.0)
    np.testing.assert_allclose(P.R, xi.P.R, atol=1e-12)
    np.testing.assert_allclose(P.x, xi.P.x, atol=1e-12)


def test_schedule_velocity_switches_at_segment_start():
    segs = (VelocitySegment(0.0, (0, 0, 1), (1, 0, 0)), VelocitySegment(2.0, (0, 0, 0), (0, 2, 0)))
    sc = ScenarioConfig(trajectory="schedule", segments=segs)
    np.testing.assert_array_equal(sc.velocity(1.99).omega, [0, 0, 1])
    np.testing.assert_array_equal(sc.velocity(2.0).v, [0, 2, 0])


def test_zero_duration_simulation_has_initial_state_only():
    res = simulate(scenario_standard(duration=0.0))
    assert res.times.shape == (1,)
    np.testing.assert_array_equal(res.est_R[0], np.eye(3))
    np.testing.assert_allclose(np.linalg.norm(res.est_landmarks[0], axis=1), 10.0)


def test_simulation_is_deterministic_with_noise():
    sc = scenario_standard(duration=1.0, noise=0.01)
    a, b = simulate(sc), simulate(sc)
    np.testing.assert_array_equal(a.est_x, b.est_x)
    np.testing.assert_array_equal(a.bearings, b.bearings)


def test_simulation_keep_traces_false_matches_final_row():
    sc = scenario_standard(duration=1.0)
    full, last = simulate(sc), simulate(sc, keep_traces=False)
    np.testing.assert_array_equal(full.est_x[-1], last.est_x[0])
    np.testing.assert_array_equal(full.storage[-1], last.storage[0])


def test_initial_estimate_at_truth_stays_put():
    sc = scenario_standard(duration=2.0, observer=ObserverConfig.simulation_preset(integrator="rk4", dt=0.01))
    xi = TotalState(sc.initial_pose(), sc.landmark_positions())
    init = [(y, r) for y, r in zip(output(xi), xi.ranges())]
    res = simulate(sc, initial_estimate=init)
    assert res.bearing_error.max() < 1e-9
    np.testing.assert_allclose(res.range_ratio, 1.0, atol=1e-9)


def test_rotation_of_initial_pose_is_respected():
    sc = scenario_standard(initial_rotation=(0.0, 0.0, np.pi / 2))
    np.testing.assert_allclose(sc.initial_pose().R, so3_exp(np.array([0, 0, np.pi / 2])))
