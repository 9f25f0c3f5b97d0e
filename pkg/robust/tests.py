import numpy as np
from django.test import SimpleTestCase, tag

from gamecore.config import GameConfig
from gamecore.tree import History
from gamecore.testing import random_tree
from nonstrategic.automata import AutomatonKind, Level0Agent
from strategic.levelk import Level1Planner, history_beliefs

from .hypotheses import AugmentedType, BeliefSet, BehaviorModel, HypothesisPredictor, expand_types, filter_consistent
from .planner import MAXMIN, RobustPlanner, robust_response, robust_set

CFG = GameConfig()


def play(tree, choose_0, choose_1):
    node = tree.root
    while not node.is_terminal:
        node = node.child((choose_0(node), choose_1(node)))
    return node


def level0(agent, kind, gamma, rng):
    automaton = Level0Agent(index=agent, kind=kind, gamma=gamma)
    return lambda node: automaton.act(node, node.cfg, rng)


class TypeExpansionTests(SimpleTestCase):
    def test_sizes(self):
        self.assertEqual(len(expand_types(CFG.type_grid)), 25)
        self.assertEqual(len(expand_types([0.5])), 5)
        self.assertEqual(len(expand_types([0.5, 0.5, 0.0])), 10)

    def test_empty_grid(self):
        with self.assertRaises(ValueError):
            expand_types([])

    def test_ordering_and_json(self):
        beliefs = expand_types([0.0, -1.0])
        first = list(beliefs)[:2]
        self.assertEqual(first, [AugmentedType("AC", -1.0), AugmentedType("AC", 0.0)])
        self.assertEqual(beliefs.to_json()[-1], {"model": "mspe", "gamma": 0.0})

    def test_out_of_range_type(self):
        with self.assertRaises(ValueError):
            AugmentedType(BehaviorModel.NAC, 1.5)


class FilterTests(SimpleTestCase):
    def test_empty_history_keeps_everything(self):
        tree = random_tree(0, stages=2)
        predictor = HypothesisPredictor(tree, 0, 0.0)
        self.assertEqual(filter_consistent(History(tree.root), 1, predictor), expand_types(CFG.type_grid))

    @tag("slow")
    def test_simulated_automaton_survives_and_sets_shrink(self):
        for seed in range(8):
            tree = random_tree(seed, stages=2, n_samples=2)
            rng = np.random.default_rng(seed)
            leaf = play(tree, level0(0, AutomatonKind.AC, 0.5, rng), level0(1, AutomatonKind.NAC, 0.0, rng))
            predictor = HypothesisPredictor(tree, 0, 0.5)
            previous = expand_types(CFG.type_grid)
            for prefix in History(leaf).prefixes():
                beliefs = filter_consistent(prefix, 1, predictor)
                self.assertIn(AugmentedType("NAC", 0.0), beliefs)
                self.assertTrue(beliefs.within(previous))
                previous = beliefs

    @tag("slow")
    def test_simulated_level1_survives(self):
        for seed in range(5):
            tree = random_tree(seed, stages=2)
            rng = np.random.default_rng(seed)

            def level1(node):
                return Level1Planner(tree, 1, 0.5, history_beliefs(node, 1, tree.cfg)).choice(node)

            leaf = play(tree, level0(0, AutomatonKind.AC, 0.0, rng), level1)
            predictor = HypothesisPredictor(tree, 0, 0.0)
            for prefix in History(leaf).prefixes():
                self.assertIn(AugmentedType("level1", 0.5), filter_consistent(prefix, 1, predictor))

    def test_slack_only_widens(self):
        tree = random_tree(3, stages=2)
        rng = np.random.default_rng(3)
        leaf = play(tree, level0(0, AutomatonKind.NAC, 0.0, rng), level0(1, AutomatonKind.AC, -1.0, rng))
        predictor = HypothesisPredictor(tree, 0, 0.0)
        strict = filter_consistent(History(leaf), 1, predictor, slack=0)
        loose = filter_consistent(History(leaf), 1, predictor, slack=1)
        self.assertTrue(strict.within(loose))
        self.assertEqual(filter_consistent(History(leaf), 1, predictor, slack=2), expand_types(CFG.type_grid))


class RobustResponseTests(SimpleTestCase):
    def exhaustive(self, planner, node, beliefs):
        """max over own of inf over hypotheses of max over predicted opponent actions."""
        best, best_score = None, -np.inf
        for own in node.action_ids(0):
            inner = []
            for hypothesis in beliefs:
                predicted = planner.predictor.predict(node, 1, hypothesis)
                if predicted:
                    inner.append(max(planner.pair_value(node, (own, o)) for o in predicted))
            score = min(inner)
            if score > best_score + 1e-9:
                best, best_score = own, score
        return best, best_score

    def test_two_hypotheses_match_the_score_tensor(self):
        for seed in range(6):
            tree = random_tree(seed, stages=1, n_samples=2)
            beliefs = BeliefSet.of([AugmentedType("AC", 0.5), AugmentedType("NAC", -0.5)])
            planner = RobustPlanner(tree, 0, 0.0, beliefs)
            decision = planner.decide(tree.root)
            choice, score = self.exhaustive(planner, tree.root, beliefs)
            self.assertEqual(decision.choice, choice)
            self.assertAlmostEqual(decision.scores[choice], score, places=8)
            for per_own in decision.breakdown.values():
                for own, m in per_own.items():
                    self.assertLessEqual(decision.scores[own], m + 1e-9)

    def test_singleton_belief_is_a_best_response(self):
        tree = random_tree(2, stages=1, n_samples=2)
        hypothesis = AugmentedType("NAC", 0.0)
        planner = RobustPlanner(tree, 0, 0.5, BeliefSet.of([hypothesis]))
        predicted = planner.predictor.predict(tree.root, 1, hypothesis)
        best = max(
            tree.root.action_ids(0),
            key=lambda own: (max(planner.pair_value(tree.root, (own, o)) for o in predicted), -own),
        )
        self.assertEqual(planner.decide(tree.root).choice, best)

    def test_never_below_maxmin_over_predicted_actions(self):
        for seed in range(6):
            tree = random_tree(seed, stages=2)
            beliefs = expand_types(CFG.type_grid)
            planner = RobustPlanner(tree, 0, 0.0, beliefs)
            for node in tree.decision_nodes:
                decision = planner.decide(node)
                union = set()
                for hypothesis in beliefs:
                    union.update(planner.predictor.predict(node, 1, hypothesis))
                maxmin = max(min(planner.pair_value(node, (own, o)) for o in union) for own in node.action_ids(0))
                self.assertGreaterEqual(decision.scores[decision.choice], maxmin - 1e-8)

    def test_empty_belief_falls_back_to_maxmin(self):
        tree = random_tree(4, stages=1, n_samples=2)
        decision = robust_response(History(tree.root), BeliefSet(), 0.0)
        self.assertTrue(decision.fallback)
        self.assertEqual(list(decision.breakdown), [MAXMIN])
        planner = RobustPlanner(tree, 0, 0.0, BeliefSet())
        values = {
            own: min(planner.pair_value(tree.root, (own, o)) for o in tree.root.action_ids(1))
            for own in tree.root.action_ids(0)
        }
        top = max(values.values())
        self.assertEqual(decision.choice, min(i for i, v in values.items() if v >= top - 1e-9))

    def test_beliefs_are_filtered_when_missing(self):
        tree = random_tree(1, stages=2)
        rng = np.random.default_rng(1)
        leaf = play(tree, level0(0, AutomatonKind.AC, 0.0, rng), level0(1, AutomatonKind.NAC, 0.5, rng))
        node = History(leaf).steps[-1][0]
        decision = robust_response(History(node), None, 0.0)
        self.assertIn(decision.choice, node.action_ids(0))
        self.assertEqual(set(decision.to_dict()["scores"]), {str(i) for i in node.action_ids(0)})

    def test_scores_are_deterministic(self):
        tree = random_tree(5, stages=2)
        a = RobustPlanner(tree, 1, 0.5, expand_types([0.0, 1.0])).decide(tree.root)
        b = RobustPlanner(tree, 1, 0.5, expand_types([1.0, 0.0])).decide(tree.root)
        self.assertEqual(a, b)
        self.assertNotIn(MAXMIN, a.breakdown)

    def test_solution_set_covers_every_decision_node(self):
        tree = random_tree(5, stages=2)
        solution = robust_set(tree, (0.0, 0.5))
        solution.validate(tree)
        self.assertEqual(solution.histories(), sorted(n.history_id for n in tree.decision_nodes))
        root = solution.admissible(tree.root.history_id, 0)
        self.assertEqual(root, (robust_response(tree.root, None, 0.0, tree, agent=0).choice,))
