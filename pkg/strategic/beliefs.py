# strategic/beliefs.py
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from gamecore.config import GameConfig
from gamecore.tree import GameNode, Observation
from kinematics.primitives import ManeuverClass
from nonstrategic.automata import AutomatonKind, automaton_support

from .exceptions import EmptyBelief


@dataclass(frozen=True)
class TypeInterval:
    lower: float = -1.0
    upper: float = 1.0
    lower_open: bool = False
    upper_open: bool = False

    @classmethod
    def full(cls) -> "TypeInterval":
        return cls()

    @classmethod
    def nothing(cls) -> "TypeInterval":
        return cls(1.0, -1.0)

    @property
    def empty(self) -> bool:
        if self.lower > self.upper:
            return True
        return self.lower == self.upper and (self.lower_open or self.upper_open)

    def contains(self, gamma: float) -> bool:
        if self.empty:
            return False
        above = gamma > self.lower if self.lower_open else gamma >= self.lower
        below = gamma < self.upper if self.upper_open else gamma <= self.upper
        return above and below

    def grid(self, grid: Iterable[float]) -> tuple[float, ...]:
        return tuple(g for g in grid if self.contains(g))

    def raise_lower(self, value: float, open_: bool) -> "TypeInterval":
        if value > self.lower or (value == self.lower and open_ and not self.lower_open):
            return replace(self, lower=value, lower_open=open_)
        return self

    def drop_upper(self, value: float, open_: bool) -> "TypeInterval":
        if value < self.upper or (value == self.upper and open_ and not self.upper_open):
            return replace(self, upper=value, upper_open=open_)
        return self

    def within(self, other: "TypeInterval") -> bool:
        """True if self ⊆ other."""
        if self.empty:
            return True
        if other.empty:
            return False
        low_ok = self.lower > other.lower or (
            self.lower == other.lower and (self.lower_open or not other.lower_open))
        high_ok = self.upper < other.upper or (
            self.upper == other.upper and (self.upper_open or not other.upper_open))
        return low_ok and high_ok

    def witness(self, grid: Iterable[float] | None = None) -> float | None:
        """Member closest to 0 (on the grid when given); open ends report their bound."""
        if grid is not None:
            members = self.grid(grid)
            return min(members, key=lambda g: (abs(g), g)) if members else None
        if self.empty:
            return None
        if self.lower <= 0 <= self.upper and self.contains(0.0):
            return 0.0
        return self.lower if self.lower > 0 else self.upper

    def __str__(self):
        if self.empty:
            return "∅"
        lo = "(" if self.lower_open else "["
        hi = ")" if self.upper_open else "]"
        return f"{lo}{self.lower:g}, {self.upper:g}{hi}"

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper,
                "lower_open": self.lower_open, "upper_open": self.upper_open, "empty": self.empty}


@dataclass(frozen=True)
class BeliefL1:
    ac: TypeInterval = TypeInterval()
    nac: TypeInterval = TypeInterval()

    def interval(self, kind) -> TypeInterval:
        return self.ac if AutomatonKind(kind) == AutomatonKind.AC else self.nac

    def grid_types(self, kind, grid: Iterable[float]) -> tuple[float, ...]:
        return self.interval(kind).grid(grid)

    def is_empty_on(self, grid: Sequence[float]) -> bool:
        return not self.ac.grid(grid) and not self.nac.grid(grid)

    def within(self, other: "BeliefL1") -> bool:
        return self.ac.within(other.ac) and self.nac.within(other.nac)

    def to_dict(self) -> dict:
        return {"AC": str(self.ac), "NAC": str(self.nac)}


# ----- belief updates -----

@dataclass(frozen=True)
class StageSummary:
    """What one observed stage tells about the automaton types."""

    maneuver: ManeuverClass
    best_wait: float | None     # max wait step safety (None: no wait trajectory)
    best_proceed: float | None  # max proceed step safety (None: no proceed trajectory)


def summarize(obs: Observation, agent: int) -> StageSummary:
    return StageSummary(
        maneuver=ManeuverClass(obs.maneuver),
        best_wait=obs.node.max_step_safety(agent, ManeuverClass.WAIT),
        best_proceed=obs.node.max_step_safety(agent, ManeuverClass.PROCEED),
    )


def _update(belief: BeliefL1, s: StageSummary, direction: str) -> BeliefL1:
    ac, nac = belief.ac, belief.nac
    waited = s.maneuver == ManeuverClass.WAIT
    own = s.best_wait if waited else s.best_proceed
    if own is None:
        # neither automaton emits a maneuver the node does not offer
        return BeliefL1(TypeInterval.nothing(), TypeInterval.nothing())
    forced = (s.best_proceed if waited else s.best_wait) is None

    if not forced:
        if direction == "ge":
            ac = ac.drop_upper(s.best_wait, False) if waited else ac.raise_lower(s.best_wait, True)
        else:
            ac = ac.raise_lower(s.best_wait, False) if waited else ac.drop_upper(s.best_wait, True)
        nac = nac.raise_lower(s.best_proceed, False) if waited else nac.drop_upper(s.best_proceed, True)
    return BeliefL1(ac, nac)


def belief_from_summaries(summaries: Iterable[StageSummary], direction: str = "le",
                          start: BeliefL1 | None = None) -> BeliefL1:
    belief = start or BeliefL1()
    for s in summaries:
        belief = _update(belief, s, direction)
    return belief


def update_consistent_belief(history, agent: int, cfg: GameConfig, start: BeliefL1 | None = None) -> BeliefL1:
    """
    Type intervals of each automaton that explain the agent's maneuvers so far:
      AC:  [max over waits of best-wait safety, min over proceeds of best-wait safety)
      NAC: [max over waits of best-proceed safety, min over proceeds of best-proceed safety)
    Stages where the other maneuver had no trajectory carry no information.
    """
    return belief_from_summaries(
        (summarize(obs, agent) for obs in history.observations(agent)),
        cfg.ac_condition_direction,
        start,
    )


def level0_consistent_actions(node: GameNode, belief: BeliefL1, agent: int, cfg: GameConfig) -> tuple[int, ...]:
    """Union of automaton supports over every grid type the belief keeps."""
    if belief.is_empty_on(cfg.type_grid):
        raise EmptyBelief(f"no level-0 type explains agent {agent} at {node.history_id}")
    ids: set[int] = set()
    for kind in AutomatonKind:
        for gamma in belief.grid_types(kind, cfg.type_grid):
            ids.update(automaton_support(kind, node, agent, gamma, cfg)[1])
    return tuple(sorted(ids))
