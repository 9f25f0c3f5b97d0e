import math

import numpy as np
from django.test import SimpleTestCase

from kinematics.primitives import KinematicLimits, VehicleState
from kinematics.services import generate_trajectories

from .config import GameConfig
from .exceptions import InvalidConfig, MissingStrategy, Stuck
from .testing import lane, parallel_tree, small_config
from .tree import History, build_game_tree
from .utilities import (
    StepUtilities,
    aggregate,
    discounted_value,
    progress_utility,
    safety_utility,
    step_utilities,
    weighted_value,
)

CFG = GameConfig()


def cruise(y, speed=8.0, x=0.0):
    (tr,) = generate_trajectories(VehicleState(x=x, y=y, vx=speed), lane(y), "proceed", n_samples=1)
    return tr


class ConfigTests(SimpleTestCase):
    def test_defaults(self):
        self.assertEqual(CFG.stages, 3)
        self.assertEqual(CFG.cont_stages, 3)
        self.assertEqual(CFG.progress_cap, 28.0)
        self.assertEqual(CFG.type_grid, (-1.0, -0.5, 0.0, 0.5, 1.0))

    def test_horizon_must_be_a_multiple_of_the_period(self):
        with self.assertRaises(InvalidConfig):
            GameConfig(horizon=5.0, period=2.0)
        with self.assertRaises(InvalidConfig):
            GameConfig(discount=0.0)
        with self.assertRaises(InvalidConfig):
            GameConfig(type_grid=(2.0,))
        with self.assertRaises(InvalidConfig):
            GameConfig(target_band="wide")

    def test_total_weight(self):
        cfg = GameConfig(continuation_stages=0)
        self.assertAlmostEqual(cfg.total_weight(3), 0.9 + 0.81 + 0.729)
        self.assertAlmostEqual(CFG.total_weight(1), sum(0.9 ** k for k in range(1, 5)))


class UtilityTests(SimpleTestCase):
    def test_safety_sigmoid(self):
        self.assertAlmostEqual(safety_utility(CFG.d0, CFG), 0.0)
        self.assertLess(1.0 - safety_utility(CFG.d0 + 10 / CFG.alpha, CFG), 1e-4)
        self.assertAlmostEqual(safety_utility(0.0, CFG), 2 / (1 + math.e ** 3) - 1, places=12)
        self.assertAlmostEqual(safety_utility(0.0, CFG), -0.9051, places=4)

    def test_safety_is_strictly_increasing(self):
        gaps = np.linspace(0.0, 12.0, 200)
        values = [safety_utility(g, CFG) for g in gaps]
        self.assertTrue(all(a < b for a, b in zip(values, values[1:])))

    def test_progress_is_clamped_linear(self):
        self.assertEqual(progress_utility(0.0, CFG), 0.0)
        self.assertEqual(progress_utility(40.0, CFG), 1.0)
        self.assertAlmostEqual(progress_utility(14.0, CFG), 0.5)

    def test_step_utilities_two_and_three_agents(self):
        a, b, far = cruise(0.0), cruise(3.0), cruise(9.0)
        u = step_utilities(0, [a, b], CFG)
        self.assertAlmostEqual(u.safety, 2 / (1 + math.exp(-1.5)) - 1, places=9)
        self.assertAlmostEqual(u.safety, 0.6351, places=4)
        self.assertAlmostEqual(u.progress, a.length / 28.0)
        self.assertEqual(step_utilities(0, [a, b, far], CFG).safety, u.safety)
        self.assertEqual(step_utilities(0, [a, a], CFG).safety, safety_utility(0.0, CFG))

    def test_aggregate_threshold(self):
        self.assertEqual(aggregate(StepUtilities(0.3, 0.8), 0.5), 0.3)
        self.assertEqual(aggregate(StepUtilities(0.7, 0.8), 0.5), 0.8)
        self.assertEqual(aggregate(StepUtilities(0.5, 0.8), 0.5), 0.5)
        for s in (-1.0, 0.2, 1.0):
            self.assertEqual(aggregate(StepUtilities(s, 0.4), 1.0), s)

    def test_weighted_value(self):
        no_cont = GameConfig(continuation_stages=0)
        self.assertAlmostEqual(weighted_value([0.4, 0.4, 0.4], 0.4, CFG), 0.4)
        self.assertAlmostEqual(weighted_value([0.7], None, GameConfig(discount=1.0, continuation_stages=0)), 0.7)
        expected = (0.9 * 0.5 + 0.81 * 0.2 + 0.729 * 0.8) / (0.9 + 0.81 + 0.729)
        self.assertAlmostEqual(weighted_value([0.5, 0.2, 0.8], None, no_cont), expected, places=12)
        self.assertAlmostEqual(weighted_value([0.5, 0.2, 0.8], None, no_cont), 0.4900, places=4)


class TreeTests(SimpleTestCase):
    def test_branching_counts(self):
        tree = parallel_tree(small_config(stages=3))
        self.assertEqual(tree.counts_by_depth(), {0: 1, 1: 4, 2: 16, 3: 64})
        self.assertEqual(len(tree.leaves), 64)
        self.assertFalse(tree.stuck_nodes)

    def test_single_stage_tree(self):
        tree = parallel_tree(small_config(stages=1))
        self.assertEqual(tree.counts_by_depth(), {0: 1, 1: 4})
        self.assertEqual(tree.decision_nodes, [tree.root])

    def test_child_states_are_trajectory_endpoints(self):
        tree = parallel_tree(small_config(stages=2))
        for node in tree.decision_nodes:
            for joint, child in node.children.items():
                for agent, tr in enumerate(node.joint_trajectories(joint)):
                    self.assertIs(child.states[agent], tr.end)
                    self.assertEqual(child.states[agent].x, tr.x[-1])

    def test_history_ids_and_lookup(self):
        tree = parallel_tree(small_config(stages=2))
        child = tree.root.child((0, 1))
        self.assertEqual(child.history_id, "h/0-1")
        self.assertIs(tree.node("h/0-1"), child)
        self.assertEqual(len(History(child)), 1)
        self.assertEqual(tree.to_json()["nodes"][0]["children"]["0-1"], child.node_id)

    def test_actions_are_wait_then_proceed(self):
        tree = parallel_tree(small_config(stages=1, n_samples=3))
        for agent in range(2):
            maneuvers = [tr.maneuver for tr in tree.root.actions[agent]]
            self.assertEqual(maneuvers, sorted(maneuvers, key=lambda m: m != "wait"))

    def test_target_band_shapes_the_action_sets(self):
        reachable = parallel_tree(small_config(stages=1))
        lattice = parallel_tree(small_config(stages=1, target_band="lattice"))
        self.assertEqual([len(a) for a in reachable.root.actions], [2, 2])
        # a cubic stop from 8 m/s within one period breaks the default deceleration limit
        self.assertEqual([len(a) for a in lattice.root.actions], [1, 1])
        self.assertEqual(lattice.root.actions[0][0].maneuver, "proceed")

    def test_waiting_keeps_a_stopped_root_alive(self):
        cfg = small_config(stages=1, limits=KinematicLimits(a_max=0.1))
        states = [VehicleState(0.0, 0.0), VehicleState(0.0, 3.5)]
        tree = build_game_tree(states, cfg, [lane(0.0), lane(3.5)])
        self.assertFalse(tree.root.stuck)
        self.assertEqual([len(a) for a in tree.root.actions], [1, 1])

    def test_stuck_root_raises(self):
        cfg = small_config(stages=1, limits=KinematicLimits(a_min=-0.001, a_max=0.1))
        with self.assertRaises(Stuck):
            build_game_tree([VehicleState(0.0, 0.0, vx=0.05)], cfg, [lane(0.0)])


class DiscountedValueTests(SimpleTestCase):
    def setUp(self):
        self.cfg = small_config(stages=3)
        self.tree = parallel_tree(self.cfg, speeds=(8.0, 6.0), spacing=3.0)
        self.profile = {n.history_id: (n.joint_actions()[-1]) for n in self.tree.decision_nodes}

    def test_matches_manual_sum_along_the_path(self):
        node, steps = self.tree.root, []
        while not node.is_terminal:
            joint = self.profile[node.history_id]
            steps.append(aggregate(node.step_utilities(joint)[0], 0.0))
            node = node.child(joint)
        cont = aggregate(node.continuation()[0], 0.0)
        expected = weighted_value(steps, cont, self.cfg)
        self.assertAlmostEqual(discounted_value(self.tree.root, self.profile, 0, 0.0, self.cfg), expected, places=12)
        self.assertGreaterEqual(expected, min(steps + [cont]) - 1e-12)
        self.assertLessEqual(expected, max(steps + [cont]) + 1e-12)

    def test_missing_strategy(self):
        with self.assertRaises(MissingStrategy):
            discounted_value(self.tree.root, {}, 0, 0.0, self.cfg)
