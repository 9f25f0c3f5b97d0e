# nonstrategic/baselines.py
import itertools

from gamecore.config import GameConfig
from gamecore.constants import TOL
from gamecore.exceptions import Stuck
from gamecore.tree import GameNode
from gamecore.utilities import aggregate


def maxmax_values(node: GameNode, agent: int, gamma: float, cfg: GameConfig) -> list[float]:
    """Per own action: the best aggregated step value over every joint choice of the others."""
    if not node.actions[agent]:
        raise Stuck(f"agent {agent} has no trajectory at {node.history_id}")
    others = [range(len(acts)) if i != agent else (None,) for i, acts in enumerate(node.actions)]
    values = []
    for own in node.action_ids(agent):
        best = -float("inf")
        for combo in itertools.product(*others):
            joint = tuple(own if i == agent else a for i, a in enumerate(combo))
            best = max(best, aggregate(node.step_utilities(joint)[agent], gamma))
        values.append(best)
    return values


def maxmax_support(node: GameNode, agent: int, gamma: float, cfg: GameConfig) -> tuple[int, ...]:
    values = maxmax_values(node, agent, gamma, cfg)
    top = max(values)
    return tuple(i for i, v in enumerate(values) if v >= top - TOL)


def maxmax_action(node: GameNode, agent: int, gamma: float, cfg: GameConfig) -> int:
    return maxmax_support(node, agent, gamma, cfg)[0]
