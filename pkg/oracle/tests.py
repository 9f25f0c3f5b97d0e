import random
from unittest import mock

from django.test import SimpleTestCase, tag

from gamecore.exceptions import MissingStrategy
from gamecore.testing import parallel_tree, random_tree, small_config
from gamecore.tree import History
from gamecore.utilities import Returns, StepUtilities
from robust.hypotheses import BeliefSet
from robust.planner import robust_response
from strategic.beliefs import update_consistent_belief
from strategic.equilibria import solve_equilibrium
from strategic.exceptions import NoPureEquilibrium

from .constants import AUTOMATA, ORACLE_INSTANCES
from .exceptions import TooLarge
from .filters import HypothesisOracle, oracle_consistent_types, oracle_filter, oracle_robust
from .profiles import (
    StrategyProfile,
    enumerate_profiles,
    oracle_spne,
    profile_count,
    profitable_deviation,
)
from .services import (
    CONCEPTS,
    SKIP,
    check_level1,
    check_mspe,
    check_robust,
    check_spne,
    check_sspe,
    instance_types,
    run_checks,
)


class StubLeaf:
    is_terminal = True
    depth = 1

    def __init__(self, history_id):
        self.history_id = history_id

    def continuation(self):
        return None

    def terminal_return(self, agent, gamma):
        return Returns()


class StubStage:
    """One-stage, two-action game whose payoffs are progress utilities (safety pinned at 1)."""

    is_terminal = False
    depth = 0
    remaining = 1
    n_agents = 2
    history_id = "h"

    def __init__(self, table):
        self.table = table
        self.actions = ((None, None), (None, None))
        self.children = {joint: StubLeaf(f"h/{joint[0]}-{joint[1]}") for joint in table}

    def joint_actions(self):
        return sorted(self.table)

    def action_ids(self, agent):
        return (0, 1)

    def child(self, joint):
        return self.children[tuple(joint)]

    def step_utilities(self, joint):
        return tuple(StepUtilities(1.0, p) for p in self.table[tuple(joint)])


class StubTree:
    def __init__(self, table):
        self.cfg = small_config(stages=1, continuation_stages=0)
        self.root = StubStage(table)
        self.nodes = [self.root, *self.root.children.values()]
        self.decision_nodes = [self.root]
        self.n_agents = 2


PRISONERS = {(0, 0): (0.6, 0.6), (0, 1): (0.0, 1.0), (1, 0): (1.0, 0.0), (1, 1): (0.3, 0.3)}
PENNIES = {(0, 0): (1.0, 0.0), (1, 1): (1.0, 0.0), (0, 1): (0.0, 1.0), (1, 0): (0.0, 1.0)}


class ProfileEnumerationTests(SimpleTestCase):
    def test_profile_counts(self):
        one = parallel_tree(small_config(stages=1))
        profiles = list(enumerate_profiles(one))
        self.assertEqual(len(profiles), 4)
        self.assertEqual(len(set(profiles)), 4)
        for profile in profiles:
            profile.validate(one)

        two = parallel_tree(small_config(stages=2))
        self.assertEqual(profile_count(two), 4 * 4 ** 4)
        self.assertEqual(len(set(enumerate_profiles(two))), 1024)

    def test_limit(self):
        tree = parallel_tree(small_config(stages=2))
        with self.assertRaises(TooLarge):
            list(enumerate_profiles(tree, limit=100))

    def test_validation(self):
        tree = parallel_tree(small_config(stages=1))
        with self.assertRaises(MissingStrategy):
            StrategyProfile.of({}).validate(tree)
        with self.assertRaises(ValueError):
            StrategyProfile.of({"h": (0, 5)}).validate(tree)
        with self.assertRaises(ValueError):
            StrategyProfile.of({"h": (0, 0), "h/0-0": (0, 0)}).validate(tree)

    def test_with_joint_leaves_the_original_alone(self):
        profile = StrategyProfile.of({"h": (0, 0)})
        changed = profile.with_joint("h", (1, 0))
        self.assertEqual(profile["h"], (0, 0))
        self.assertEqual(changed.to_dict(), {"h": [1, 0]})


class SubgamePerfectionTests(SimpleTestCase):
    def test_dominant_strategies_give_one_profile(self):
        tree = StubTree(PRISONERS)
        found = oracle_spne(tree, [0.0, 0.0])
        self.assertEqual(found, [StrategyProfile.of({"h": (1, 1)})])
        self.assertEqual(StrategyProfile.of(solve_equilibrium(tree, [0.0, 0.0]).profile()), found[0])

    def test_matching_pennies_has_none(self):
        tree = StubTree(PENNIES)
        self.assertEqual(oracle_spne(tree, [0.0, 0.0]), [])
        strict = tree.cfg.with_overrides(equilibrium_fallback=False)
        with self.assertRaises(NoPureEquilibrium):
            solve_equilibrium(tree, [0.0, 0.0], strict)

    def test_result_does_not_depend_on_enumeration_order(self):
        tree = random_tree(0, stages=2)
        types = instance_types(0, tree)
        profiles = list(enumerate_profiles(tree))
        random.Random(0).shuffle(profiles)
        shuffled = {p for p in profiles if profitable_deviation(tree, p, types, tree.cfg) is None}
        self.assertEqual(shuffled, set(oracle_spne(tree, types)))

    def test_main_equilibrium_is_subgame_perfect(self):
        for seed in range(3):
            tree = random_tree(seed, stages=2)
            self.assertIn(check_spne(tree, instance_types(seed, tree)), (None, SKIP))

    @tag("slow")
    def test_main_equilibrium_is_subgame_perfect_on_many_seeds(self):
        for seed in range(3, 40):
            tree = random_tree(seed, stages=2)
            self.assertIn(check_spne(tree, instance_types(seed, tree)), (None, SKIP), seed)


class ReferenceFilterTests(SimpleTestCase):
    def test_lowest_aspiration_admits_everything(self):
        tree = random_tree(1, stages=2)
        solution = solve_equilibrium(tree, [-1.0, 0.5])
        for node in tree.decision_nodes:
            admitted = oracle_filter("sspe", node=node, agent=0, types=solution.types,
                                     profile=solution.profile(), cfg=tree.cfg)
            self.assertEqual(admitted, node.action_ids(0))

    def test_unknown_concept(self):
        tree = random_tree(1, stages=1)
        with self.assertRaises(ValueError):
            oracle_filter("qlk", node=tree.root)

    def test_subtree_limit(self):
        tree = random_tree(1, stages=2)
        with mock.patch("oracle.filters.NODE_LIMIT", 1):
            with self.assertRaises(TooLarge):
                oracle_filter("level1", node=tree.root, agent=0, gamma=0.0, cfg=tree.cfg)

    def test_consistent_types_match_the_belief_intervals(self):
        for seed in range(4):
            tree = random_tree(seed, stages=2)
            for leaf in tree.leaves:
                history = History(leaf)
                for agent in range(2):
                    belief = update_consistent_belief(history, agent, tree.cfg)
                    for kind in AUTOMATA:
                        self.assertEqual(
                            oracle_consistent_types(history, agent, kind, tree.cfg),
                            belief.grid_types(kind, tree.cfg.type_grid),
                        )

    def test_satisficing_sets_match(self):
        for seed in range(6):
            tree = random_tree(seed, stages=2)
            types = instance_types(seed, tree)
            self.assertIsNone(check_sspe(tree, types), seed)
            self.assertIsNone(check_mspe(tree, types), seed)

    def test_satisficing_flags_match(self):
        for seed in range(3):
            tree = random_tree(seed, stages=2, sspe_step_level=True, mspe_lhs_safety=True, aggregate_per_step=False)
            types = instance_types(seed, tree)
            self.assertIsNone(check_sspe(tree, types), seed)
            self.assertIsNone(check_mspe(tree, types), seed)

    def test_automata_match(self):
        reports = run_checks(AUTOMATA, instances=4)
        self.assertTrue(all(r.ok for r in reports), [r.failures for r in reports])
        self.assertEqual([r.concept for r in reports], list(AUTOMATA))

    def test_level1_matches(self):
        for seed in range(4):
            tree = random_tree(seed, stages=2)
            self.assertIsNone(check_level1(tree, instance_types(seed, tree)), seed)

    def test_level1_expectation_mode_matches(self):
        for seed in range(3):
            tree = random_tree(seed, stages=2, l1_expectation=True)
            self.assertIsNone(check_level1(tree, instance_types(seed, tree)), seed)

    def test_empty_belief_is_maxmin(self):
        tree = random_tree(4, stages=1, n_samples=2)
        oracle = HypothesisOracle(0, 0.0, {}, tree.cfg)
        ref = oracle_robust(tree.root, 0, 0.0, {1: []}, oracle, tree.cfg)
        decision = robust_response(History(tree.root), BeliefSet(), 0.0)
        self.assertTrue(ref.fallback)
        self.assertEqual(ref.choice, decision.choice)

    @tag("slow")
    def test_robust_matches(self):
        for seed in range(4):
            tree = random_tree(seed, stages=2)
            self.assertIsNone(check_robust(tree, instance_types(seed, tree)), seed)

    def test_run_checks_rejects_unknown_concepts(self):
        with self.assertRaises(ValueError):
            run_checks(("qlk",), instances=1)


@tag("slow")
class FullScaleDifferentialTests(SimpleTestCase):
    def test_two_stage_trees(self):
        reports = run_checks(CONCEPTS, instances=ORACLE_INSTANCES, stages=2)
        for report in reports:
            with self.subTest(concept=report.concept):
                self.assertTrue(report.ok, report.failures[:5])
                self.assertGreater(report.passed, 0)

    def test_three_stage_trees(self):
        # exhaustive SPNE enumeration outgrows the profile limit here and is skipped; the filters still run
        reports = run_checks(CONCEPTS, instances=ORACLE_INSTANCES, stages=3)
        for report in reports:
            with self.subTest(concept=report.concept):
                self.assertTrue(report.ok, report.failures[:5])
                self.assertEqual(report.instances, reports[0].instances)
        self.assertGreater(sum(r.passed for r in reports if r.concept != "spne"), 0)
