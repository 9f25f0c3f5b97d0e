import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from .constants import TARGET_BANDS
from .exceptions import EmptyActionSet, MismatchedSampling, OffPath
from .paths import Path
from .primitives import KinematicLimits, ManeuverClass, VehicleState
from .services import (
    check_limits,
    classify_speed_profile,
    cubic_profile,
    extend_constant,
    generate_trajectories,
    min_gap,
    profile_problems,
    speed_targets,
    trajectory_length,
    truncate,
)

STRAIGHT = Path.from_points([(-50.0, 0.0), (200.0, 0.0)])


def at(x, y=0.0, speed=0.0, theta=0.0):
    return VehicleState(x=x, y=y, vx=speed, theta=theta)


class VehicleStateTests(SimpleTestCase):
    def test_speed_is_norm_of_body_velocity(self):
        self.assertAlmostEqual(VehicleState(0, 0, vx=3.0, vy=4.0).speed, 5.0)

    def test_rejects_non_finite_and_out_of_range_yaw(self):
        with self.assertRaises(ValueError):
            VehicleState(float("nan"), 0.0)
        with self.assertRaises(ValueError):
            VehicleState(0.0, 0.0, theta=4.0)

    def test_limits_validate_sign_of_accelerations(self):
        with self.assertRaises(ValueError):
            KinematicLimits(a_min=1.0)
        with self.assertRaises(ValueError):
            KinematicLimits(v_max=0.0)


class GenerateTrajectoriesTests(SimpleTestCase):
    def test_stopped_vehicle_wait_stays_put(self):
        trajs = generate_trajectories(at(0.0), STRAIGHT, ManeuverClass.WAIT, n_samples=3)
        self.assertEqual(len(trajs), 1)
        self.assertEqual(trajectory_length(trajs[0]), 0.0)
        self.assertTrue(np.all(trajs[0].v == 0.0))

    def test_profile_is_a_true_cubic(self):
        c = cubic_profile(10.0, 4.0, 2.0)
        self.assertAlmostEqual(c[3], 0.5, places=12)      # -dv / (3 T^2)
        self.assertAlmostEqual(c[2], -3.0, places=12)
        (tr,) = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "wait",
                                      KinematicLimits(a_min=-8.0), n_samples=1, band="reachable")
        self.assertAlmostEqual(tr.a[-1], 0.0, places=9)
        self.assertAlmostEqual(tr.a[0], 2 * (tr.end_speed - 10.0) / 2.0, places=9)
        jerk = np.diff(np.diff(tr.v)) / tr.dt ** 2
        self.assertGreater(np.abs(jerk).min(), 0.0)
        self.assertTrue(np.all(np.diff(tr.v) <= 1e-12))

    def test_wait_lattice_spans_zero_to_current_speed(self):
        limits = KinematicLimits(a_min=-10.0)
        np.testing.assert_allclose(speed_targets(10.0, "wait", limits, 3, 2.0), [0.0, 10 / 3, 20 / 3])
        trajs = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "wait", limits, n_samples=3, band="lattice")
        np.testing.assert_allclose([tr.end_speed for tr in trajs], [0.0, 10 / 3, 20 / 3], atol=1e-9)
        for tr in trajs:
            self.assertGreaterEqual(np.diff(tr.v).min() / tr.dt, -10.0 - 1e-9)
            self.assertTrue(np.all(np.diff(tr.v) <= 1e-12))

    def test_lattice_drops_infeasible_targets(self):
        # peak deceleration of a cubic to 0 or 3.33 m/s from 10 m/s exceeds the default -4.5 m/s²
        trajs = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "wait", KinematicLimits(),
                                      n_samples=3, band="lattice")
        np.testing.assert_allclose([tr.end_speed for tr in trajs], [20 / 3], atol=1e-9)
        np.testing.assert_allclose(speed_targets(6.0, "proceed", KinematicLimits(), 3, 2.0), [6.0, 10.0, 14.0])
        trajs = generate_trajectories(at(0.0, speed=6.0), STRAIGHT, "proceed", n_samples=3, band="lattice")
        np.testing.assert_allclose([tr.end_speed for tr in trajs], [6.0], atol=1e-9)

    def test_lattice_is_the_default_band(self):
        limits = KinematicLimits(a_min=-10.0)
        default = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "wait", limits, n_samples=3)
        np.testing.assert_allclose([tr.end_speed for tr in default], [0.0, 10 / 3, 20 / 3], atol=1e-9)

    def test_reachable_band_is_clipped_to_the_limits(self):
        trajs = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "wait", KinematicLimits(),
                                      n_samples=3, band="reachable")
        np.testing.assert_allclose([tr.end_speed for tr in trajs], [5.5, 7.0, 8.5], atol=1e-9)
        trajs = generate_trajectories(at(0.0), STRAIGHT, "proceed", KinematicLimits(), n_samples=3, band="reachable")
        np.testing.assert_allclose([tr.end_speed for tr in trajs], [0.5, 1.75, 3.0], atol=1e-9)

    def test_tight_jerk_limit_removes_candidates(self):
        state = at(0.0, speed=10.0)
        loose = generate_trajectories(state, STRAIGHT, "wait", KinematicLimits(), n_samples=6, band="lattice")
        tight = generate_trajectories(state, STRAIGHT, "wait", KinematicLimits(jerk_max=1.0), n_samples=6,
                                      band="lattice")
        np.testing.assert_allclose([tr.end_speed for tr in loose], [20 / 3, 25 / 3], atol=1e-9)
        np.testing.assert_allclose([tr.end_speed for tr in tight], [25 / 3], atol=1e-9)
        self.assertEqual(profile_problems(10.0, 20 / 3, 2.0, KinematicLimits(jerk_max=1.0)), ["jerk"])
        with self.assertRaises(EmptyActionSet):
            generate_trajectories(state, STRAIGHT, "wait", KinematicLimits(jerk_max=0.1), n_samples=6,
                                  band="lattice")

    def test_proceed_at_v_max_keeps_speed(self):
        limits = KinematicLimits()
        trajs = generate_trajectories(at(0.0, speed=limits.v_max), STRAIGHT, "proceed", limits, n_samples=3)
        self.assertEqual(len(trajs), 1)
        self.assertAlmostEqual(trajectory_length(trajs[0]), limits.v_max * 2.0, places=6)

    def test_sample_zero_is_the_node_state(self):
        state = at(5.0, y=0.4, speed=6.0)
        for tr in generate_trajectories(state, STRAIGHT, "proceed", n_samples=3):
            self.assertIs(tr.start, state)
            self.assertEqual((tr.x[0], tr.y[0]), (5.0, 0.4))
            self.assertAlmostEqual(tr.y[-1], 0.0, places=9)

    def test_off_path_state_is_rejected(self):
        with self.assertRaises(OffPath):
            generate_trajectories(at(0.0, y=5.0, speed=3.0), STRAIGHT, "wait")

    def test_unreachable_maneuver_raises(self):
        # a_max so small that no proceed target stays out of the wait class from a standstill
        limits = KinematicLimits(a_max=0.1)
        self.assertEqual(len(speed_targets(0.0, "proceed", limits, 3, 2.0, band="reachable")), 0)
        for band in TARGET_BANDS:
            with self.subTest(band=band), self.assertRaises(EmptyActionSet):
                generate_trajectories(at(0.0), STRAIGHT, "proceed", limits, band=band)

    def test_unknown_band(self):
        with self.assertRaises(ValueError):
            speed_targets(5.0, "wait", KinematicLimits(), 3, 2.0, band="wide")

    def test_randomized_states_pass_limit_checker_and_classifier(self):
        rng = np.random.default_rng(7)
        limits = KinematicLimits()
        bend = Path.from_points([(0.0, 0.0), (30.0, 0.0), (60.0, 20.0), (120.0, 20.0)])
        for _ in range(60):
            speed = float(rng.uniform(0.0, limits.v_max))
            s = float(rng.uniform(0.0, 40.0))
            x, y, heading = bend.locate(s)
            state = at(float(x), float(y), speed=speed, theta=float(heading))
            for maneuver, band in itertools.product(ManeuverClass, TARGET_BANDS):
                try:
                    trajs = generate_trajectories(state, bend, maneuver, limits, n_samples=3, band=band)
                except EmptyActionSet:
                    continue
                for tr in trajs:
                    self.assertEqual(check_limits(tr, limits), [])
                    self.assertEqual(profile_problems(speed, tr.end_speed, tr.duration, limits), [])
                    self.assertEqual(tr.maneuver, maneuver)
                    self.assertEqual(classify_speed_profile(tr.v[0], tr.end_speed, tr.duration), maneuver)
                    if maneuver == ManeuverClass.PROCEED:
                        self.assertGreaterEqual(tr.end_speed, speed - limits.speed_eps)
                    else:
                        self.assertTrue(np.all(np.diff(tr.v) <= 1e-9))


class GeometryTests(SimpleTestCase):
    def test_constant_speed_length(self):
        (tr,) = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "proceed",
                                      KinematicLimits(v_max=10.0), n_samples=1)
        self.assertAlmostEqual(trajectory_length(tr), 20.0, delta=0.01)
        start_end = math.hypot(tr.x[-1] - tr.x[0], tr.y[-1] - tr.y[0])
        self.assertGreaterEqual(trajectory_length(tr) + 1e-12, start_end)

    def test_length_invariant_under_rigid_motion(self):
        bend = Path.from_points([(0.0, 0.0), (20.0, 0.0), (35.0, 12.0)])
        moved = bend.transformed(rotation=0.7, shift=(12.0, -3.0))
        base = generate_trajectories(at(0.0, speed=8.0), bend, "proceed", n_samples=2)
        x, y, heading = moved.locate(0.0)
        other = generate_trajectories(at(float(x), float(y), speed=8.0, theta=float(heading)),
                                      moved, "proceed", n_samples=2)
        for a, b in zip(base, other):
            self.assertAlmostEqual(trajectory_length(a), trajectory_length(b), places=6)

    def test_min_gap_parallel_identical_and_symmetric(self):
        lane_b = Path.from_points([(-50.0, 3.0), (200.0, 3.0)])
        (a,) = generate_trajectories(at(0.0, speed=8.0), STRAIGHT, "proceed", n_samples=1)
        (b,) = generate_trajectories(at(0.0, y=3.0, speed=8.0), lane_b, "proceed", n_samples=1)
        self.assertAlmostEqual(min_gap(a, b), 3.0)
        self.assertEqual(min_gap(a, b), min_gap(b, a))
        self.assertEqual(min_gap(a, a), 0.0)

    def test_min_gap_of_crossing_paths_matches_brute_force(self):
        cross = Path.from_points([(10.0, -30.0), (10.0, 60.0)])
        (a,) = generate_trajectories(at(0.0, speed=5.0), STRAIGHT, "proceed", n_samples=1)
        (b,) = generate_trajectories(at(10.0, y=-12.0, speed=6.0, theta=math.pi / 2), cross, "proceed", n_samples=1)
        expected = min(math.hypot(a.x[i] - b.x[i], a.y[i] - b.y[i]) for i in range(a.n_samples))
        self.assertAlmostEqual(min_gap(a, b), expected, places=12)

    def test_min_gap_rejects_mismatched_sampling(self):
        (a,) = generate_trajectories(at(0.0, speed=5.0), STRAIGHT, "proceed", n_samples=1)
        with self.assertRaises(MismatchedSampling):
            min_gap(a, extend_constant(a, 1.0))

    def test_extend_constant(self):
        (moving,) = generate_trajectories(at(0.0, speed=10.0), STRAIGHT, "proceed",
                                          KinematicLimits(v_max=10.0), n_samples=1)
        longer = extend_constant(moving, 6.0)
        self.assertAlmostEqual(longer.length - moving.length, 60.0, places=6)
        self.assertEqual(longer.maneuver, moving.maneuver)
        self.assertAlmostEqual(longer.duration, 8.0)

        (stopped,) = generate_trajectories(at(0.0), STRAIGHT, "wait")
        self.assertEqual(extend_constant(stopped, 6.0).length, 0.0)

    def test_extend_then_truncate_restores_samples(self):
        (tr,) = generate_trajectories(at(0.0, speed=7.0), STRAIGHT, "proceed", n_samples=1)
        back = truncate(extend_constant(tr, 6.0), tr.duration)
        for name in ("t", "x", "y", "v", "a", "theta"):
            np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))


class PathTests(SimpleTestCase):
    def test_project_reports_signed_offset(self):
        s, offset = STRAIGHT.project(10.0, 1.2)
        self.assertAlmostEqual(s, 60.0)
        self.assertAlmostEqual(offset, 1.2)
        self.assertAlmostEqual(STRAIGHT.project(10.0, -1.2)[1], -1.2)

    def test_locate_extrapolates_past_the_end(self):
        x, y, heading = STRAIGHT.locate(STRAIGHT.length + 5.0)
        self.assertAlmostEqual(float(x), 205.0)
        self.assertAlmostEqual(float(y), 0.0)
        self.assertAlmostEqual(float(heading), 0.0)
