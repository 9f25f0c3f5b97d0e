import itertools

import numpy as np
from django.test import SimpleTestCase

from gamecore.config import GameConfig
from gamecore.exceptions import Stuck
from gamecore.testing import crossing_tree, random_tree, small_config
from gamecore.tree import History, Observation
from gamecore.utilities import aggregate
from kinematics.primitives import ManeuverClass

from .automata import (
    AutomatonKind,
    AutomatonState,
    Level0Agent,
    automaton_support,
    in_trace,
    preference_condition,
    step_automaton,
    trace,
)
from .baselines import maxmax_action, maxmax_support, maxmax_values

W, P = ManeuverClass.WAIT, ManeuverClass.PROCEED
CFG = GameConfig()


class StubNode:
    """Single-agent node with fixed maneuvers and step safeties per action."""

    def __init__(self, maneuvers, safeties, history_id="h", depth=0):
        self.maneuvers = list(maneuvers)
        self.safeties = list(safeties)
        self.history_id = history_id
        self.depth = depth

    def maneuver_ids(self, agent, maneuver):
        return tuple(i for i, m in enumerate(self.maneuvers) if m == maneuver)

    def maneuver_of(self, agent, idx):
        return self.maneuvers[idx]

    def step_safety(self, agent, idx):
        return self.safeties[idx]

    def max_step_safety(self, agent, maneuver):
        ids = self.maneuver_ids(agent, maneuver)
        return max(self.safeties[i] for i in ids) if ids else None


class PreferenceConditionTests(SimpleTestCase):
    def test_accommodating_condition(self):
        node = StubNode([W, W, P], [0.9, 0.7, 0.1])
        self.assertFalse(preference_condition("AC", node, 0, 0.5, CFG))
        self.assertTrue(preference_condition("AC", node, 0, 0.95, CFG))

    def test_direction_flag_flips_accommodating_condition(self):
        node = StubNode([W, W, P], [0.9, 0.7, 0.1])
        flipped = CFG.with_overrides(ac_condition_direction="ge")
        self.assertTrue(preference_condition("AC", node, 0, 0.5, flipped))
        self.assertFalse(preference_condition("AC", node, 0, 0.95, flipped))

    def test_non_accommodating_condition(self):
        node = StubNode([W, P], [0.6, 0.2])
        self.assertTrue(preference_condition("NAC", node, 0, 0.0, CFG))
        self.assertFalse(preference_condition("NAC", node, 0, 0.2, CFG))

    def test_empty_referenced_maneuver_is_false(self):
        only_proceed = StubNode([P, P], [0.1, 0.3])
        only_wait = StubNode([W], [0.4])
        self.assertFalse(preference_condition("AC", only_proceed, 0, 1.0, CFG))
        self.assertFalse(preference_condition("NAC", only_wait, 0, -1.0, CFG))


class AutomatonSupportTests(SimpleTestCase):
    def test_stay_stopped_is_the_only_wait(self):
        node = StubNode([W, P], [-0.2, -0.9])
        agent = Level0Agent(index=0, kind=AutomatonKind.AC, gamma=0.5)
        state, support = step_automaton(agent, node, CFG)
        self.assertEqual((state, support), (AutomatonState.WAIT, (0,)))

    def test_accommodating_proceeds_when_condition_fails(self):
        node = StubNode([W, W, P, P], [0.9, 0.7, 0.3, 0.2])
        state, support = automaton_support("AC", node, 0, 0.5, CFG)
        self.assertEqual(state, AutomatonState.PROCEED)
        self.assertEqual(support, (2, 3))

    def test_filters_to_safe_trajectories_when_available(self):
        node = StubNode([W, P, P, P], [0.1, 0.8, 0.4, 0.9])
        state, support = automaton_support("NAC", node, 0, 0.5, CFG)
        self.assertEqual(state, AutomatonState.PROCEED)
        self.assertEqual(support, (1, 3))

    def test_falls_back_to_the_available_maneuver(self):
        node = StubNode([P], [0.9])
        state, support = automaton_support("NAC", node, 0, 1.0, CFG)  # condition false, no wait exists
        self.assertEqual((state, support), (AutomatonState.PROCEED, (0,)))
        with self.assertRaises(Stuck):
            automaton_support("AC", StubNode([], []), 0, 0.0, CFG)

    def test_support_matches_preference_semantics_on_random_trees(self):
        for seed in range(20):
            tree = random_tree(seed, stages=1, n_samples=2)
            node = tree.root
            for agent, kind, gamma in itertools.product(range(2), AutomatonKind, CFG.type_grid):
                state, support = automaton_support(kind, node, agent, gamma, tree.cfg)
                waits = node.maneuver_ids(agent, W)
                proceeds = node.maneuver_ids(agent, P)
                best_w = max((node.step_safety(agent, i) for i in waits), default=None)
                best_p = max((node.step_safety(agent, i) for i in proceeds), default=None)
                if kind == AutomatonKind.AC:
                    prefers = best_w is not None and best_w <= gamma
                    held, other = (waits, proceeds) if prefers else (proceeds, waits)
                else:
                    prefers = best_p is not None and best_p > gamma
                    held, other = (proceeds, waits) if prefers else (waits, proceeds)
                if not held:
                    expected = other
                elif prefers:
                    expected = tuple(i for i in held if node.step_safety(agent, i) >= gamma) or held
                else:
                    expected = held
                self.assertEqual(set(support), set(expected))
                self.assertTrue(support)

    def test_accommodating_wait_support_is_filtered(self):
        for seed in range(20):
            node = random_tree(seed, stages=1, n_samples=3).root
            for gamma in CFG.type_grid:
                state, support = automaton_support("AC", node, 0, gamma, CFG)
                if state != AutomatonState.WAIT:
                    continue
                safe = [i for i in node.maneuver_ids(0, W) if node.step_safety(0, i) >= gamma]
                if safe:
                    self.assertEqual(list(support), safe)


class TraceTests(SimpleTestCase):
    def test_single_node_trace_is_the_support(self):
        node = StubNode([W, P, P], [0.1, 0.4, 0.6])
        self.assertEqual(trace("NAC", 0.0, [node], 0, CFG), {(1,), (2,)})

    def test_trace_is_a_product(self):
        first = StubNode([W, P, P], [0.1, 0.4, 0.6])
        second = StubNode([W, P, P, P], [0.1, 0.4, 0.6, 0.7])
        self.assertEqual(len(trace("NAC", 0.0, [first, second], 0, CFG)), 6)

    def test_sampled_play_is_in_its_trace(self):
        cfg = small_config(stages=2, n_samples=2)
        tree = crossing_tree(cfg)
        rng = np.random.default_rng(3)
        for kind, gamma in itertools.product(AutomatonKind, cfg.type_grid):
            node = tree.root
            ego = Level0Agent(index=0, kind=kind, gamma=gamma)
            other = Level0Agent(index=1, kind=AutomatonKind.NAC, gamma=0.0)
            nodes, actions = [], []
            while not node.is_terminal:
                joint = (ego.act(node, cfg, rng), other.act(node, cfg, rng))
                nodes.append(node)
                actions.append(joint[0])
                node = node.child(joint)
            self.assertIn(tuple(actions), trace(kind, gamma, nodes, 0, cfg))
            self.assertTrue(in_trace(kind, gamma, History(node).observations(0), 0, cfg))
            maneuver_only = [Observation(o.node, o.maneuver) for o in History(node).observations(0)]
            self.assertTrue(in_trace(kind, gamma, maneuver_only, 0, cfg))

    def test_switch_script_changes_kind(self):
        agent = Level0Agent.from_script(0, "AC", 0.0, [(1, "NAC")])
        agent.apply_switch(0)
        self.assertEqual(agent.kind, AutomatonKind.AC)
        agent.apply_switch(1)
        self.assertEqual(agent.kind, AutomatonKind.NAC)


class MaxmaxTests(SimpleTestCase):
    def test_matches_exhaustive_enumeration(self):
        for seed in range(15):
            tree = random_tree(seed, stages=1, n_samples=2)
            node = tree.root
            for agent, gamma in itertools.product(range(2), (-0.5, 0.0, 0.5)):
                best_own, best_val = None, -np.inf
                for own in node.action_ids(agent):
                    val = max(
                        aggregate(node.step_utilities((own, o) if agent == 0 else (o, own))[agent], gamma)
                        for o in node.action_ids(1 - agent)
                    )
                    if val > best_val:
                        best_own, best_val = own, val
                self.assertEqual(maxmax_action(node, agent, gamma, tree.cfg), best_own)
                self.assertAlmostEqual(max(maxmax_values(node, agent, gamma, tree.cfg)), best_val)

    def test_single_action(self):
        node = random_tree(0, stages=1).root
        for agent in range(2):
            if len(node.actions[agent]) == 1:
                self.assertEqual(maxmax_action(node, agent, 0.0, CFG), 0)
        self.assertIn(maxmax_action(node, 0, 0.0, CFG), maxmax_support(node, 0, 0.0, CFG))
