# strategic/levelk.py
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from gamecore.config import GameConfig
from gamecore.constants import TOL
from gamecore.tree import GameNode, GameTree, History
from gamecore.utilities import Returns, check_type, mix_returns, stage_return, value

from .beliefs import BeliefL1, level0_consistent_actions, update_consistent_belief
from .exceptions import EmptyBelief
from .solutions import SolutionConcept, SolutionSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeResponse:
    scores: dict[int, float]        # own action id -> normalized value
    returns: dict[int, Returns]     # own action id -> returns behind the score
    choice: int

    def tie_set(self) -> tuple[int, ...]:
        top = self.scores[self.choice]
        return tuple(i for i, s in self.scores.items() if s >= top - TOL)


def _as_beliefs(agent: int, n_agents: int, beliefs) -> dict[int, BeliefL1]:
    if isinstance(beliefs, BeliefL1) or beliefs is None:
        beliefs = {j: beliefs or BeliefL1() for j in range(n_agents) if j != agent}
    return {j: beliefs.get(j, BeliefL1()) for j in range(n_agents) if j != agent}


class Level1Planner:
    """
    Level-1 response of ``agent`` against level-0 opponents whose automata are
    restricted by ``beliefs``. The beliefs stay frozen over the subtree; future
    stages are valued by repeating the same response at every future node.
    """

    def __init__(self, tree: GameTree, agent: int, gamma: float,
                 beliefs: BeliefL1 | Mapping[int, BeliefL1] | None = None, cfg: GameConfig | None = None):
        self.tree = tree
        self.agent = agent
        self.gamma = check_type(gamma)
        self.cfg = cfg or tree.cfg
        self.beliefs = _as_beliefs(agent, tree.n_agents, beliefs)
        self._memo: dict[str, NodeResponse] = {}
        for j, belief in self.beliefs.items():
            if belief.is_empty_on(self.cfg.type_grid):
                raise EmptyBelief(f"no level-0 type explains agent {j}")

    def opponent_sets(self, node: GameNode) -> list[tuple[int, ...]]:
        return [
            (None,) if j == self.agent else level0_consistent_actions(node, self.beliefs[j], j, self.cfg)
            for j in range(node.n_agents)
        ]

    def _after(self, node: GameNode, joint: tuple[int, ...]) -> Returns:
        child = node.child(joint)
        if child.is_terminal:
            return child.terminal_return(self.agent, self.gamma)
        response = self.respond(child)
        return response.returns[response.choice]

    def _pair_returns(self, node: GameNode, joint: tuple[int, ...]) -> Returns:
        step = node.step_utilities(joint)[self.agent]
        return stage_return(step, self.gamma, self._after(node, joint), self.cfg)

    def respond(self, node: GameNode) -> NodeResponse:
        if node.history_id in self._memo:
            return self._memo[node.history_id]

        combos = list(itertools.product(*self.opponent_sets(node)))
        scores, returns = {}, {}
        for own in node.action_ids(self.agent):
            joints = [tuple(own if j == self.agent else a for j, a in enumerate(c)) for c in combos]
            if self.cfg.l1_expectation:
                ret = mix_returns([1.0 / len(joints)] * len(joints), [self._pair_returns(node, jt) for jt in joints])
                score = value(ret, node.remaining, self.gamma, self.cfg)
            else:
                # optimistic pairing, lowest opponent combination on ties
                ret, score = None, -float("inf")
                for jt in joints:
                    r = self._pair_returns(node, jt)
                    v = value(r, node.remaining, self.gamma, self.cfg)
                    if ret is None or v > score + TOL:
                        ret, score = r, v
            scores[own], returns[own] = score, ret

        top = max(scores.values())
        choice = next(i for i, s in scores.items() if s >= top - TOL)
        response = NodeResponse(scores, returns, choice)
        self._memo[node.history_id] = response
        return response

    def choice(self, node: GameNode) -> int:
        return self.respond(node).choice

    def tie_set(self, node: GameNode) -> tuple[int, ...]:
        return self.respond(node).tie_set()


def level1_response(history, belief: BeliefL1 | Mapping[int, BeliefL1] | None, gamma: float,
                    cfg: GameConfig | None = None, agent: int = 0) -> int:
    """Own action id of the level-1 agent at the node ending ``history``."""
    node = getattr(history, "node", history)
    return Level1Planner(node.tree, agent, gamma, belief, cfg).choice(node)


def history_beliefs(node: GameNode, agent: int, cfg: GameConfig) -> dict[int, BeliefL1]:
    """Beliefs of ``agent`` about every opponent from the play leading to ``node``."""
    history = History(node)
    return {j: update_consistent_belief(history, j, cfg) for j in range(node.n_agents) if j != agent}


def level1_set(tree: GameTree, types: Sequence[float], cfg: GameConfig | None = None) -> SolutionSet:
    """Every agent's level-1 response at every decision node, beliefs taken from the history."""
    cfg = cfg or tree.cfg
    planners: dict[tuple, Level1Planner] = {}
    entries, flagged = {}, set()
    for node in tree.decision_nodes:
        entries[node.history_id] = {}
        for agent, gamma in enumerate(types):
            beliefs = history_beliefs(node, agent, cfg)
            key = (agent, tuple(sorted(beliefs.items())))
            try:
                if key not in planners:
                    planners[key] = Level1Planner(tree, agent, gamma, beliefs, cfg)
                entries[node.history_id][agent] = (planners[key].choice(node),)
            except EmptyBelief as exc:
                logger.warning("level-1 agent %d at %s: %s", agent, node.history_id, exc)
                entries[node.history_id][agent] = ()
                flagged.add(node.history_id)
    return SolutionSet(SolutionConcept.LEVEL1, entries, tuple(flagged), {"types": list(types)})
