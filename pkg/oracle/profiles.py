# oracle/profiles.py
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from gamecore.exceptions import MissingStrategy
from gamecore.utilities import check_type, discounted_value

from .constants import PROFILE_LIMIT, VALUE_TOL
from .exceptions import TooLarge

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyProfile:
    """A pure strategy profile: one joint action per decision history."""

    items: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        object.__setattr__(self, "_joints", dict(self.items))

    @classmethod
    def of(cls, joints: Mapping[str, Sequence[int]]) -> "StrategyProfile":
        return cls(tuple(sorted((h, tuple(int(a) for a in j)) for h, j in joints.items())))

    def __getitem__(self, history_id: str) -> tuple[int, ...]:
        return self._joints[history_id]

    def __contains__(self, history_id: str) -> bool:
        return history_id in self._joints

    def __len__(self):
        return len(self.items)

    def with_joint(self, history_id: str, joint: Sequence[int]) -> "StrategyProfile":
        return StrategyProfile.of({**self._joints, history_id: joint})

    def validate(self, tree) -> "StrategyProfile":
        decision = {n.history_id: n for n in tree.decision_nodes}
        for h, node in decision.items():
            if h not in self._joints:
                raise MissingStrategy(f"profile undefined at history {h}")
            joint = self._joints[h]
            if len(joint) != node.n_agents or any(not 0 <= a < len(node.actions[i]) for i, a in enumerate(joint)):
                raise ValueError(f"joint {joint} is not playable at {h}")
        extra = set(self._joints) - set(decision)
        if extra:
            raise ValueError(f"profile assigns actions at non-decision histories {sorted(extra)}")
        return self

    def to_dict(self) -> dict:
        return {h: list(j) for h, j in self.items}


def overlay(profile: Mapping | StrategyProfile, history_id: str, joint: Sequence[int]) -> dict:
    """``profile`` with the joint at one history replaced."""
    base = dict(profile.items) if isinstance(profile, StrategyProfile) else dict(profile)
    base[history_id] = tuple(joint)
    return base


def profile_count(tree) -> int:
    return math.prod(len(node.joint_actions()) for node in tree.decision_nodes)


def enumerate_profiles(tree, limit: int = PROFILE_LIMIT) -> Iterator[StrategyProfile]:
    count = profile_count(tree)
    if count > limit:
        raise TooLarge(f"{count} strategy profiles exceed the limit of {limit}")
    nodes = tree.decision_nodes
    ids = [n.history_id for n in nodes]
    for combo in itertools.product(*(n.joint_actions() for n in nodes)):
        yield StrategyProfile.of(dict(zip(ids, combo)))


def profitable_deviation(tree, profile, types: Sequence[float], cfg, tol: float = VALUE_TOL):
    """
    First (history, agent, action) whose one-shot deviation beats ``profile``
    by more than ``tol``, or None.
    """
    for node in tree.decision_nodes:
        h = node.history_id
        joint = profile[h]
        for agent, gamma in enumerate(types):
            base = discounted_value(node, profile, agent, gamma, cfg)
            for idx in node.action_ids(agent):
                if idx == joint[agent]:
                    continue
                deviated = list(joint)
                deviated[agent] = idx
                if discounted_value(node, overlay(profile, h, deviated), agent, gamma, cfg) > base + tol:
                    return h, agent, idx
    return None


def oracle_spne(tree, types: Sequence[float], cfg=None, limit: int = PROFILE_LIMIT) -> list[StrategyProfile]:
    """
    Every pure profile with no profitable one-shot deviation at any history,
    which in a finite game is exactly subgame perfection.
    """
    cfg = cfg or tree.cfg
    types = tuple(check_type(g) for g in types)
    if len(types) != tree.n_agents:
        raise ValueError(f"{len(types)} types given for {tree.n_agents} agents")
    found = [p for p in enumerate_profiles(tree, limit) if profitable_deviation(tree, p, types, cfg) is None]
    logger.debug("oracle: %d subgame-perfect profiles of %d", len(found), profile_count(tree))
    return sorted(found, key=lambda p: p.items)
