# nonstrategic/automata.py
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from django.db import models

from gamecore.config import GameConfig
from gamecore.exceptions import Stuck
from gamecore.tree import GameNode, Observation
from kinematics.primitives import ManeuverClass


class AutomatonKind(models.TextChoices):
    AC = "AC", "Accommodating"
    NAC = "NAC", "Non-accommodating"


class AutomatonState(models.TextChoices):
    WAIT = "W", "Wait"
    PROCEED = "P", "Proceed"


_STATE_OF = {ManeuverClass.WAIT: AutomatonState.WAIT, ManeuverClass.PROCEED: AutomatonState.PROCEED}


def _other(maneuver: ManeuverClass) -> ManeuverClass:
    return ManeuverClass.PROCEED if maneuver == ManeuverClass.WAIT else ManeuverClass.WAIT


def preference_condition(kind, node: GameNode, agent: int, gamma: float, cfg: GameConfig) -> bool:
    """
    AC: best wait step safety <= gamma (>= with ac_condition_direction="ge").
    NAC: best proceed step safety > gamma.
    False when the referenced maneuver has no trajectory.
    """
    kind = AutomatonKind(kind)
    if kind == AutomatonKind.AC:
        best = node.max_step_safety(agent, ManeuverClass.WAIT)
        if best is None:
            return False
        return best >= gamma if cfg.ac_condition_direction == "ge" else best <= gamma
    best = node.max_step_safety(agent, ManeuverClass.PROCEED)
    if best is None:
        return False
    return best > gamma


def automaton_support(kind, node: GameNode, agent: int, gamma: float, cfg: GameConfig) -> tuple[AutomatonState, tuple[int, ...]]:
    """State entered at ``node`` and the action ids the automaton randomizes over."""
    kind = AutomatonKind(kind)
    waits = node.maneuver_ids(agent, ManeuverClass.WAIT)
    proceeds = node.maneuver_ids(agent, ManeuverClass.PROCEED)
    if not waits and not proceeds:
        raise Stuck(f"agent {agent} has no trajectory at {node.history_id}")

    by_maneuver = {ManeuverClass.WAIT: waits, ManeuverClass.PROCEED: proceeds}
    preferred = ManeuverClass.WAIT if kind == AutomatonKind.AC else ManeuverClass.PROCEED
    condition = preference_condition(kind, node, agent, gamma, cfg)
    held = preferred if condition else _other(preferred)
    if not by_maneuver[held]:
        held = _other(held)
        return _STATE_OF[held], by_maneuver[held]

    ids = by_maneuver[held]
    if condition:
        ids = tuple(i for i in ids if node.step_safety(agent, i) >= gamma) or ids
    return _STATE_OF[held], ids


def step_automaton(agent: "Level0Agent", node: GameNode, cfg: GameConfig) -> tuple[AutomatonState, tuple[int, ...]]:
    support = agent.step(node, cfg)
    return agent.state, support


@dataclass
class Level0Agent:
    index: int
    kind: AutomatonKind
    gamma: float
    state: AutomatonState | None = None
    switch_policy: dict[int, AutomatonKind] = field(default_factory=dict)

    def __post_init__(self):
        self.kind = AutomatonKind(self.kind)
        self.switch_policy = {int(k): AutomatonKind(v) for k, v in dict(self.switch_policy).items()}

    @classmethod
    def from_script(cls, index: int, kind, gamma: float, script: Iterable[Sequence] = ()) -> "Level0Agent":
        return cls(index=index, kind=kind, gamma=gamma, switch_policy={stage: k for stage, k in script})

    def apply_switch(self, stage: int):
        if stage in self.switch_policy:
            self.kind = self.switch_policy[stage]

    def step(self, node: GameNode, cfg: GameConfig) -> tuple[int, ...]:
        self.state, support = automaton_support(self.kind, node, self.index, self.gamma, cfg)
        return support

    def act(self, node: GameNode, cfg: GameConfig, rng: np.random.Generator | None = None) -> int:
        """One action drawn uniformly from the support (lowest id without a generator)."""
        self.apply_switch(node.depth)
        support = self.step(node, cfg)
        if rng is None:
            return support[0]
        return int(support[rng.integers(len(support))])


# ----- traces -----

def trace(kind, gamma: float, nodes: Sequence[GameNode], agent: int, cfg: GameConfig) -> set[tuple[int, ...]]:
    supports = [automaton_support(kind, node, agent, gamma, cfg)[1] for node in nodes]
    return set(itertools.product(*supports))


def in_trace(kind, gamma: float, observations: Sequence[Observation], agent: int, cfg: GameConfig) -> bool:
    """
    Membership of an observed play in the trace. Observations without an
    action id are matched on maneuver only.
    """
    for obs in observations:
        support = automaton_support(kind, obs.node, agent, gamma, cfg)[1]
        if obs.action is not None:
            if obs.action not in support:
                return False
        elif all(obs.node.maneuver_of(agent, i) != obs.maneuver for i in support):
            return False
    return True
