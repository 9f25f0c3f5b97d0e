# robust/planner.py
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping

from gamecore.config import GameConfig
from gamecore.constants import TOL
from gamecore.exceptions import Stuck
from gamecore.tree import GameNode, GameTree, History
from gamecore.utilities import Returns, check_type, stage_return, value
from strategic.solutions import SolutionConcept, SolutionSet

from .hypotheses import AugmentedType, BeliefSet, HypothesisPredictor, filter_consistent

logger = logging.getLogger(__name__)

MAXMIN = "maxmin"


def _higher(v: float, ref: float) -> bool:
    return v > ref + TOL


def _lower(v: float, ref: float) -> bool:
    return v < ref - TOL


@dataclass(frozen=True)
class RobustDecision:
    choice: int
    scores: dict[int, float]
    breakdown: dict[str, dict[int, float]] = field(default_factory=dict)
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "choice": self.choice,
            "fallback": self.fallback,
            "scores": {str(i): s for i, s in self.scores.items()},
            "breakdown": {h: {str(i): m for i, m in per.items()} for h, per in self.breakdown.items()},
        }


def _label(hypotheses: tuple[tuple[int, AugmentedType], ...]) -> str:
    return ",".join(f"{j}:{t}" for j, t in hypotheses)


class RobustPlanner:
    """
    Robust response of ``agent``: per own action, the worst over consistent
    hypotheses of the best payoff against the actions each hypothesis predicts.
    Future stages repeat the same response with the belief sets frozen.
    """

    def __init__(self, tree: GameTree, agent: int, gamma: float,
                 beliefs: BeliefSet | Mapping[int, BeliefSet], cfg: GameConfig | None = None,
                 predictor: HypothesisPredictor | None = None):
        self.tree = tree
        self.agent = agent
        self.gamma = check_type(gamma)
        self.cfg = cfg or tree.cfg
        self.predictor = predictor or HypothesisPredictor(tree, agent, gamma, self.cfg)
        opponents = [j for j in range(tree.n_agents) if j != agent]
        if isinstance(beliefs, BeliefSet):
            beliefs = {j: beliefs for j in opponents}
        self.beliefs = {j: beliefs.get(j, BeliefSet()) for j in opponents}
        self.fallback = any(b.empty for b in self.beliefs.values())
        if self.fallback:
            logger.warning("agent %d: no consistent hypothesis for some opponent; using maxmin", agent)
        self.hypotheses = [
            tuple(zip(opponents, combo)) for combo in itertools.product(*(list(self.beliefs[j]) for j in opponents))
        ]
        self._memo: dict[str, tuple[RobustDecision, Returns]] = {}

    # ----- payoffs -----

    def pair_returns(self, node: GameNode, joint: tuple[int, ...]) -> Returns:
        child = node.child(joint)
        if child.is_terminal:
            after = child.terminal_return(self.agent, self.gamma)
        else:
            after = self._decide(child)[1]
        return stage_return(node.step_utilities(joint)[self.agent], self.gamma, after, self.cfg)

    def pair_value(self, node: GameNode, joint: tuple[int, ...]) -> float:
        return value(self.pair_returns(node, joint), node.remaining, self.gamma, self.cfg)

    def _joints(self, node: GameNode, own: int, per_agent: list) -> list[tuple[int, ...]]:
        return [tuple(own if j == self.agent else a for j, a in enumerate(c)) for c in itertools.product(*per_agent)]

    def predicted_actions(self, node: GameNode, hypotheses) -> list | None:
        per_agent = [(None,)] * node.n_agents
        for j, hypothesis in hypotheses:
            predicted = self.predictor.predict(node, j, hypothesis)
            if not predicted:
                return None
            per_agent[j] = predicted
        return per_agent

    # ----- decisions -----

    def _best(self, node: GameNode, joints, better) -> tuple[float, Returns]:
        """First joint whose value beats the running one by more than TOL under ``better``."""
        best_v, best_r = None, None
        for joint in joints:
            r = self.pair_returns(node, joint)
            v = value(r, node.remaining, self.gamma, self.cfg)
            if best_v is None or better(v, best_v):
                best_v, best_r = v, r
        return best_v, best_r

    def _decide(self, node: GameNode) -> tuple[RobustDecision, Returns]:
        if node.history_id in self._memo:
            return self._memo[node.history_id]
        own_ids = node.action_ids(self.agent)
        if not own_ids:
            raise Stuck(f"agent {self.agent} has no trajectory at {node.history_id}")
        predictions = []
        if not self.fallback:
            for hypotheses in self.hypotheses:
                per_agent = self.predicted_actions(node, hypotheses)
                if per_agent is not None:
                    predictions.append((_label(hypotheses), per_agent))
        fallback = not predictions
        if fallback:
            full = [(None,) if j == self.agent else node.action_ids(j) for j in range(node.n_agents)]

        scores, behind, breakdown = {}, {}, {}
        for own in own_ids:
            if fallback:
                scores[own], behind[own] = self._best(node, self._joints(node, own, full), _lower)
                breakdown.setdefault(MAXMIN, {})[own] = scores[own]
                continue
            worst_v, worst_r = None, None
            for label, per_agent in predictions:
                m, r = self._best(node, self._joints(node, own, per_agent), _higher)
                breakdown.setdefault(label, {})[own] = m
                if worst_v is None or _lower(m, worst_v):
                    worst_v, worst_r = m, r
            scores[own], behind[own] = worst_v, worst_r

        top = max(scores.values())
        choice = next(i for i in own_ids if scores[i] >= top - TOL)
        decision = RobustDecision(choice, scores, breakdown, fallback)
        logger.debug("robust %d at %s: %s", self.agent, node.history_id, decision.to_dict())
        self._memo[node.history_id] = (decision, behind[choice])
        return self._memo[node.history_id]

    def decide(self, node: GameNode) -> RobustDecision:
        return self._decide(node)[0]


def consistent_beliefs(history, agent: int, predictor: HypothesisPredictor) -> dict[int, BeliefSet]:
    """Belief set about every opponent of ``agent`` given the observed play."""
    return {
        j: filter_consistent(history, j, predictor)
        for j in range(predictor.tree.n_agents) if j != agent
    }


def robust_response(history, beliefs: BeliefSet | Mapping[int, BeliefSet] | None, gamma_r: float,
                    tree: GameTree | None = None, cfg: GameConfig | None = None, agent: int = 0,
                    predictor: HypothesisPredictor | None = None) -> RobustDecision:
    """Robust decision at the node ending ``history``; beliefs are filtered from it when not given."""
    node = getattr(history, "node", history)
    tree = tree or node.tree
    predictor = predictor or HypothesisPredictor(tree, agent, gamma_r, cfg)
    if beliefs is None:
        beliefs = consistent_beliefs(history if isinstance(history, History) else History(node), agent, predictor)
    if predictor.robust_agent != agent:
        raise ValueError("predictor was built for another robust agent")
    return RobustPlanner(tree, agent, gamma_r, beliefs, cfg, predictor).decide(node)


def robust_set(tree: GameTree, types, cfg: GameConfig | None = None) -> SolutionSet:
    """Every agent's robust choice at every decision node, beliefs filtered from the history."""
    cfg = cfg or tree.cfg
    predictors = [HypothesisPredictor(tree, i, g, cfg) for i, g in enumerate(types)]
    entries, flagged = {}, set()
    for node in tree.decision_nodes:
        history = History(node)
        entries[node.history_id] = {}
        for agent, gamma in enumerate(types):
            decision = robust_response(history, None, gamma, tree, cfg, agent, predictors[agent])
            entries[node.history_id][agent] = (decision.choice,)
            if decision.fallback:
                flagged.add(node.history_id)
    return SolutionSet(SolutionConcept.ROBUST, entries, tuple(flagged), {"types": [float(g) for g in types]})
