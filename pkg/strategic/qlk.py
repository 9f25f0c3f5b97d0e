# strategic/qlk.py
"""Quantal level-k baseline: maxmax level-0 and a logit level-1 above it."""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from gamecore.config import GameConfig
from gamecore.tree import GameNode, GameTree
from gamecore.utilities import Returns, check_type, mix_returns, stage_return, value
from nonstrategic.baselines import maxmax_support

from .solutions import SolutionConcept, SolutionSet


def logit_distribution(values: Sequence[float], lam: float) -> np.ndarray:
    """softmax(λ·values), shifted by the maximum before exponentiating."""
    if lam <= 0:
        raise ValueError("logit precision must be positive")
    x = lam * np.asarray(values, dtype=float)
    exp_x = np.exp(x - np.max(x))
    return exp_x / np.sum(exp_x)


def level0_distribution(node: GameNode, agent: int, gamma: float, cfg: GameConfig) -> dict[int, float]:
    support = maxmax_support(node, agent, gamma, cfg)
    return {i: 1.0 / len(support) for i in support}


class QLkPlanner:
    """Logit level-1 agent against maxmax level-0 opponents, solved backward."""

    def __init__(self, tree: GameTree, agent: int, types: Sequence[float], lam: float, cfg: GameConfig | None = None):
        self.tree = tree
        self.agent = agent
        self.types = tuple(check_type(g) for g in types)
        self.lam = lam
        self.cfg = cfg or tree.cfg
        self._memo: dict[str, tuple[np.ndarray, Returns]] = {}

    @property
    def gamma(self) -> float:
        return self.types[self.agent]

    def _after(self, child: GameNode) -> Returns:
        if child.is_terminal:
            return child.terminal_return(self.agent, self.gamma)
        return self.solve(child)[1]

    def action_returns(self, node: GameNode) -> list[Returns]:
        """Expected returns of each own action against the level-0 opponents."""
        others = [
            [(None, 1.0)] if j == self.agent
            else list(level0_distribution(node, j, self.types[j], self.cfg).items())
            for j in range(node.n_agents)
        ]
        out = []
        for own in node.action_ids(self.agent):
            weights, rets = [], []
            for combo in itertools.product(*others):
                joint = tuple(own if j == self.agent else a for j, (a, _) in enumerate(combo))
                step = node.step_utilities(joint)[self.agent]
                weights.append(float(np.prod([p for _, p in combo])))
                rets.append(stage_return(step, self.gamma, self._after(node.child(joint)), self.cfg))
            out.append(mix_returns(weights, rets))
        return out

    def solve(self, node: GameNode) -> tuple[np.ndarray, Returns]:
        if node.history_id not in self._memo:
            rets = self.action_returns(node)
            values = [value(r, node.remaining, self.gamma, self.cfg) for r in rets]
            probs = logit_distribution(values, self.lam)
            self._memo[node.history_id] = (probs, mix_returns(probs, rets))
        return self._memo[node.history_id]

    def distribution(self, node: GameNode) -> dict[int, float]:
        return {i: float(p) for i, p in enumerate(self.solve(node)[0])}


def qlk_response(tree: GameTree, lam: float, types: Sequence[float], cfg: GameConfig | None = None) -> SolutionSet:
    planners = [QLkPlanner(tree, i, types, lam, cfg) for i in range(tree.n_agents)]
    entries = {
        node.history_id: {i: p.distribution(node) for i, p in enumerate(planners)}
        for node in tree.decision_nodes
    }
    return SolutionSet(SolutionConcept.QLK, entries, meta={"lambda": lam, "types": list(types)})
