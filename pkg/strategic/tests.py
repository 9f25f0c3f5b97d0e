import itertools
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, tag

from gamecore.config import GameConfig
from gamecore.constants import TOL
from gamecore.exceptions import GameError
from gamecore.testing import crossing_tree, random_tree, small_config
from gamecore.tree import History
from gamecore.utilities import discounted_value
from kinematics.primitives import ManeuverClass
from nonstrategic.automata import AutomatonKind, Level0Agent, automaton_support

from .beliefs import (
    BeliefL1,
    StageSummary,
    TypeInterval,
    belief_from_summaries,
    level0_consistent_actions,
    update_consistent_belief,
)
from .constants import NASH_EPS

LEVEL0_SIMULATIONS = 1000
from .equilibria import (
    least_regret_cell,
    mspe_set,
    select_equilibrium,
    solve_equilibrium,
    spne,
    sspe_set,
    unilateral_regret,
)
from .exceptions import EmptyBelief, NoPureEquilibrium
from .levelk import Level1Planner, level1_response, level1_set
from .qlk import logit_distribution, qlk_response
from .solutions import SolutionConcept

W, P = ManeuverClass.WAIT, ManeuverClass.PROCEED
CFG = GameConfig()


def play_level0(tree, ego, other, rng):
    node = tree.root
    while not node.is_terminal:
        node = node.child((ego.act(node, tree.cfg, rng), other.act(node, tree.cfg, rng)))
    return node


class TypeIntervalTests(SimpleTestCase):
    def test_open_and_closed_ends(self):
        interval = TypeInterval(0.4, 0.8, upper_open=True)
        self.assertTrue(interval.contains(0.4))
        self.assertFalse(interval.contains(0.8))
        self.assertEqual(interval.grid(CFG.type_grid), (0.5,))
        self.assertEqual(str(interval), "[0.4, 0.8)")

    def test_empty_intervals(self):
        self.assertTrue(TypeInterval.nothing().empty)
        self.assertTrue(TypeInterval(0.5, 0.5, lower_open=True).empty)
        self.assertFalse(TypeInterval(0.5, 0.5).empty)

    def test_witness_prefers_small_types(self):
        self.assertEqual(TypeInterval().witness(CFG.type_grid), 0.0)
        self.assertEqual(TypeInterval(-1.0, -0.2).witness(CFG.type_grid), -0.5)
        self.assertEqual(TypeInterval(-0.5, 0.5).witness([-0.5, 0.5]), -0.5)
        self.assertIsNone(TypeInterval(0.1, 0.2).witness(CFG.type_grid))


class BeliefUpdateTests(SimpleTestCase):
    def test_empty_history_keeps_the_full_range(self):
        belief = belief_from_summaries([])
        self.assertEqual(belief, BeliefL1())
        self.assertEqual(belief.grid_types("AC", CFG.type_grid), CFG.type_grid)

    def test_wait_then_proceed_bounds(self):
        belief = belief_from_summaries([StageSummary(W, 0.4, 0.1), StageSummary(P, 0.8, 0.3)])
        self.assertEqual(belief.ac, TypeInterval(0.4, 0.8, upper_open=True))
        self.assertEqual(belief.grid_types("AC", CFG.type_grid), (0.5,))
        self.assertEqual(belief.nac, TypeInterval(0.1, 0.3, upper_open=True))
        self.assertEqual(belief.grid_types("NAC", CFG.type_grid), ())

    def test_direction_flag_mirrors_the_accommodating_bounds(self):
        belief = belief_from_summaries([StageSummary(W, 0.4, 0.1), StageSummary(P, -0.2, 0.3)], "ge")
        self.assertEqual(belief.ac, TypeInterval(-0.2, 0.4, lower_open=True))

    def test_forced_stages_carry_no_information(self):
        self.assertEqual(belief_from_summaries([StageSummary(W, 0.4, None)]), BeliefL1())
        self.assertEqual(belief_from_summaries([StageSummary(P, None, 0.2)]), BeliefL1())

    def test_maneuver_without_trajectories_empties_both(self):
        belief = belief_from_summaries([StageSummary(W, None, 0.2)])
        self.assertTrue(belief.ac.empty and belief.nac.empty)

    def test_generating_type_stays_inside_and_intervals_shrink(self):
        cfg = small_config(stages=2, n_samples=2)
        for seed, kind in itertools.product(range(6), AutomatonKind):
            tree = random_tree(seed, stages=2, n_samples=2)
            rng = np.random.default_rng(seed)
            for gamma in cfg.type_grid:
                leaf = play_level0(
                    tree,
                    Level0Agent(index=0, kind=kind, gamma=gamma),
                    Level0Agent(index=1, kind=AutomatonKind.NAC, gamma=0.0),
                    rng,
                )
                previous = BeliefL1()
                for prefix in History(leaf).prefixes():
                    belief = update_consistent_belief(prefix, 0, cfg)
                    self.assertTrue(belief.interval(kind).contains(gamma), (seed, kind, gamma, str(belief.interval(kind))))
                    self.assertTrue(belief.within(previous))
                    previous = belief


class Level0ConsistentActionTests(SimpleTestCase):
    def setUp(self):
        self.tree = crossing_tree(small_config(stages=1, n_samples=2))
        self.node = self.tree.root

    def test_full_belief_is_the_union_of_all_supports(self):
        expected = set()
        for kind, gamma in itertools.product(AutomatonKind, CFG.type_grid):
            expected.update(automaton_support(kind, self.node, 1, gamma, self.tree.cfg)[1])
        self.assertEqual(set(level0_consistent_actions(self.node, BeliefL1(), 1, self.tree.cfg)), expected)

    def test_single_non_accommodating_type(self):
        belief = BeliefL1(TypeInterval.nothing(), TypeInterval(1.0, 1.0))
        self.assertEqual(
            level0_consistent_actions(self.node, belief, 1, self.tree.cfg),
            tuple(sorted(automaton_support("NAC", self.node, 1, 1.0, self.tree.cfg)[1])),
        )

    def test_empty_belief_raises(self):
        with self.assertRaises(EmptyBelief):
            level0_consistent_actions(self.node, BeliefL1(TypeInterval.nothing(), TypeInterval.nothing()), 1, CFG)


class Level1Tests(SimpleTestCase):
    def brute_force(self, tree, gamma, belief, expectation=False):
        root = tree.root
        opponents = level0_consistent_actions(root, belief, 1, tree.cfg)
        best, best_v = None, -np.inf
        for own in root.action_ids(0):
            values = [discounted_value(root, {"h": (own, o)}, 0, gamma, tree.cfg) for o in opponents]
            candidates = [(np.mean(values), own)] if expectation else [(v, own) for v in values]
            for v, idx in candidates:
                if best is None or v > best_v + TOL:
                    best, best_v = idx, v
        return best

    def test_single_stage_matches_exhaustive_pairs(self):
        for seed in range(12):
            tree = random_tree(seed, stages=1, n_samples=2)
            for gamma in (-0.5, 0.0, 0.5):
                expected = self.brute_force(tree, gamma, BeliefL1())
                self.assertEqual(level1_response(History(tree.root), BeliefL1(), gamma), expected)

    def test_expectation_mode_matches_exhaustive_average(self):
        for seed in range(8):
            tree = random_tree(seed, stages=1, n_samples=2, l1_expectation=True)
            expected = self.brute_force(tree, 0.0, BeliefL1(), expectation=True)
            self.assertEqual(Level1Planner(tree, 0, 0.0, BeliefL1()).choice(tree.root), expected)

    def test_choice_is_in_its_tie_set(self):
        tree = random_tree(4, stages=2)
        planner = Level1Planner(tree, 0, 0.0)
        for node in tree.decision_nodes:
            self.assertIn(planner.choice(node), planner.tie_set(node))

    def test_empty_belief_propagates(self):
        tree = random_tree(1, stages=1)
        with self.assertRaises(EmptyBelief):
            level1_response(tree.root, BeliefL1(TypeInterval.nothing(), TypeInterval.nothing()), 0.0)

    def test_solution_set_covers_every_decision_node(self):
        tree = random_tree(2, stages=2)
        solution = level1_set(tree, (0.0, 0.5))
        solution.validate(tree)
        self.assertEqual(solution.concept, SolutionConcept.LEVEL1)
        self.assertEqual(set(solution.histories()), {n.history_id for n in tree.decision_nodes})


class StageGameTests(SimpleTestCase):
    def test_dominant_cell(self):
        values = np.array([[[3, 3], [0, 5]], [[5, 0], [1, 1]]], dtype=float)
        self.assertEqual(select_equilibrium(values), (1, 1))
        self.assertTrue((unilateral_regret(values)[1, 1] <= NASH_EPS).all())

    def test_welfare_then_lowest_joint(self):
        coordination = np.array([[[1, 1], [0, 0]], [[0, 0], [2, 2]]], dtype=float)
        self.assertEqual(select_equilibrium(coordination), (1, 1))
        tied = np.array([[[1, 1], [0, 0]], [[0, 0], [1, 1]]], dtype=float)
        self.assertEqual(select_equilibrium(tied), (0, 0))

    def test_matching_pennies_has_no_pure_cell(self):
        pennies = np.array([[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]], dtype=float)
        self.assertIsNone(select_equilibrium(pennies))
        self.assertEqual(least_regret_cell(pennies), (0, 0))
        self.assertEqual(unilateral_regret(pennies).max(axis=-1).min(), 2.0)

    def test_single_agent_is_an_argmax(self):
        values = np.array([[0.2], [0.7], [0.5]])
        self.assertEqual(select_equilibrium(values), (1,))


class EquilibriumTests(SimpleTestCase):
    def test_equilibrium_cells_have_no_profitable_deviation(self):
        for seed in range(10):
            tree = random_tree(seed, stages=2)
            solution = solve_equilibrium(tree, (0.0, 0.5))
            for node in tree.decision_nodes:
                if node.history_id in solution.flagged:
                    continue
                for agent in range(2):
                    gamma = solution.types[agent]
                    base = discounted_value(node, solution.choice, agent, gamma, tree.cfg)
                    for idx in node.action_ids(agent):
                        deviated = {**solution.choice, node.history_id: solution.deviation_joint(node, agent, idx)}
                        gain = discounted_value(node, deviated, agent, gamma, tree.cfg) - base
                        self.assertLessEqual(gain, 1e-9, (seed, node.history_id, agent, idx))

    def test_values_match_literal_sums(self):
        tree = random_tree(3, stages=3)
        solution = solve_equilibrium(tree, (-0.5, 0.5))
        for agent in range(2):
            literal = discounted_value(tree.root, solution.choice, agent, solution.types[agent], tree.cfg)
            self.assertAlmostEqual(solution.value(tree.root, agent), literal, places=9)

    def test_fallback_and_strict_mode(self):
        tree = random_tree(0, stages=1)
        with mock.patch("strategic.equilibria.select_equilibrium", return_value=None):
            with self.assertRaises(NoPureEquilibrium):
                spne(tree, (0.0, 0.0), tree.cfg.with_overrides(equilibrium_fallback=False))
            solution = spne(tree, (0.0, 0.0))
        self.assertEqual(solution.flagged, ("h",))

    def test_solution_json(self):
        tree = random_tree(5, stages=2)
        solution = spne(tree, (0.0, 0.0))
        solution.validate(tree)
        doc = solution.to_json()
        self.assertEqual(len(doc["solution"]["h"]["0"]), 1)
        self.assertEqual(doc["meta"]["path"][0], "h")
        self.assertEqual(solution.dumps(), spne(tree, (0.0, 0.0)).dumps())

    def test_type_count_must_match(self):
        with self.assertRaises(ValueError):
            spne(random_tree(0, stages=1), (0.0,))


class SatisficingTests(SimpleTestCase):
    def test_containment_properties(self):
        for seed in range(10):
            tree = random_tree(seed, stages=2, n_samples=2)
            types = (0.0, 0.5)
            solution = solve_equilibrium(tree, types)
            sspe = sspe_set(tree, types, solution=solution)
            mspe = mspe_set(tree, types, solution=solution)
            for node in tree.decision_nodes:
                h = node.history_id
                for agent in range(2):
                    star = solution.choice[h][agent]
                    self.assertIn(star, sspe.admissible(h, agent))
                    maneuver = node.maneuver_of(agent, star)
                    self.assertTrue(set(mspe.admissible(h, agent)) <= set(node.maneuver_ids(agent, maneuver)))

    def test_lowest_aspiration_admits_everything(self):
        tree = random_tree(7, stages=2, n_samples=2)
        sspe = sspe_set(tree, (-1.0, -1.0))
        for node in tree.decision_nodes:
            for agent in range(2):
                self.assertEqual(sspe.admissible(node.history_id, agent), node.action_ids(agent))

    def test_step_level_flag_also_keeps_the_equilibrium_action(self):
        tree = random_tree(2, stages=2, n_samples=2, sspe_step_level=True)
        solution = solve_equilibrium(tree, (0.5, 0.5))
        sspe = sspe_set(tree, (0.5, 0.5), solution=solution)
        self.assertIn(solution.choice["h"][0], sspe.admissible("h", 0))

    def test_maneuver_set_beats_every_other_maneuver(self):
        for seed in range(8):
            tree = random_tree(seed, stages=2, n_samples=2)
            solution = solve_equilibrium(tree, (0.0, 0.0))
            mspe = mspe_set(tree, (0.0, 0.0), solution=solution)
            node = tree.root
            for agent in range(2):
                maneuver = node.maneuver_of(agent, solution.choice["h"][agent])
                others = [i for i in node.action_ids(agent) if node.maneuver_of(agent, i) != maneuver]

                def value(i):
                    deviated = {**solution.choice, "h": solution.deviation_joint(node, agent, i)}
                    return discounted_value(node, deviated, agent, 0.0, tree.cfg)

                for idx in mspe.admissible("h", agent):
                    self.assertTrue(all(value(idx) > value(o) for o in others))


class QLkTests(SimpleTestCase):
    def test_closed_form_softmax(self):
        probs = logit_distribution([0.8, 0.2], 1.0)
        self.assertAlmostEqual(probs[0], 0.6457, places=4)
        self.assertAlmostEqual(probs[1], 0.3543, places=4)
        np.testing.assert_allclose(logit_distribution([0.4, 0.4], 1.0), [0.5, 0.5])

    def test_vanishing_precision_is_uniform(self):
        probs = logit_distribution([0.9, -0.3, 0.1], 1e-6)
        self.assertLess(np.abs(probs - 1 / 3).max(), 1e-3)
        with self.assertRaises(ValueError):
            logit_distribution([0.1], 0.0)

    def test_argmax_probability_grows_with_precision(self):
        values = [0.1, 0.5, 0.3]
        probs = [logit_distribution(values, lam)[1] for lam in (0.5, 1.0, 2.0, 5.0)]
        self.assertEqual(probs, sorted(probs))

    @tag("slow")
    def test_distributions_sum_to_one(self):
        tree = random_tree(6, stages=2, n_samples=2)
        for lam in (0.5, 1.0):
            solution = qlk_response(tree, lam, (0.0, 0.5))
            solution.validate(tree)
            for node in tree.decision_nodes:
                for agent in range(2):
                    self.assertLess(abs(sum(solution.probabilities(node.history_id, agent).values()) - 1), 1e-9)


@tag("slow")
class ConsistentBeliefCoverageTests(SimpleTestCase):
    """Seeded level-0 plays: the generating type never leaves the belief and beliefs only narrow."""

    def trees(self, count=40):
        pool = []
        for seed in itertools.count():
            if len(pool) == count:
                return pool
            try:
                pool.append(random_tree(seed, stages=2, n_samples=2))
            except GameError:
                continue

    def test_every_grid_type_over_many_plays(self):
        pool = self.trees()
        cfg = pool[0].cfg
        kinds = list(AutomatonKind)
        for kind, gamma in itertools.product(kinds, cfg.type_grid):
            for i in range(LEVEL0_SIMULATIONS):
                tree = pool[i % len(pool)]
                rng = np.random.default_rng(i)
                other = Level0Agent(index=1, kind=kinds[rng.integers(len(kinds))], gamma=float(rng.choice(cfg.type_grid)))
                leaf = play_level0(tree, Level0Agent(index=0, kind=kind, gamma=gamma), other, rng)
                previous = BeliefL1()
                for prefix in History(leaf).prefixes():
                    belief = update_consistent_belief(prefix, 0, cfg)
                    if not belief.interval(kind).contains(gamma) or not belief.within(previous):
                        self.fail(f"{kind.value} gamma={gamma} play {i}: {belief.interval(kind)}")
                    previous = belief
