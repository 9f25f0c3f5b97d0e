# robust/hypotheses.py
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from django.db import models

from gamecore.config import GameConfig
from gamecore.tree import GameNode, GameTree, History, Observation
from gamecore.utilities import check_type
from nonstrategic.automata import automaton_support
from strategic.equilibria import EquilibriumSolution, mspe_admissible, solve_equilibrium, sspe_admissible
from strategic.exceptions import EmptyBelief
from strategic.levelk import Level1Planner, history_beliefs

logger = logging.getLogger(__name__)


class BehaviorModel(models.TextChoices):
    AC = "AC", "Accommodating automaton"
    NAC = "NAC", "Non-accommodating automaton"
    LEVEL1 = "level1", "Level-1 (dLk)"
    SSPE = "sspe", "Safety-satisfied equilibrium"
    MSPE = "mspe", "Maneuver-satisfied equilibrium"


MODEL_ORDER = tuple(BehaviorModel)


@dataclass(frozen=True)
class AugmentedType:
    model: BehaviorModel
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "model", BehaviorModel(self.model))
        object.__setattr__(self, "gamma", check_type(self.gamma))

    @property
    def sort_key(self):
        return MODEL_ORDER.index(self.model), self.gamma

    def to_dict(self) -> dict:
        return {"model": self.model.value, "gamma": self.gamma}

    def __str__(self):
        return f"{self.model.value}({self.gamma:g})"


@dataclass(frozen=True)
class BeliefSet:
    members: frozenset[AugmentedType] = frozenset()

    @classmethod
    def of(cls, members: Iterable[AugmentedType]) -> "BeliefSet":
        return cls(frozenset(members))

    def __iter__(self):
        return iter(sorted(self.members, key=lambda t: t.sort_key))

    def __len__(self):
        return len(self.members)

    def __contains__(self, item):
        return item in self.members

    @property
    def empty(self) -> bool:
        return not self.members

    def within(self, other: "BeliefSet") -> bool:
        return self.members <= other.members

    def to_json(self) -> list[dict]:
        return [t.to_dict() for t in self]


def expand_types(grid: Iterable[float]) -> BeliefSet:
    grid = sorted({check_type(g) for g in grid})
    if not grid:
        raise ValueError("type grid is empty")
    return BeliefSet.of(AugmentedType(m, g) for m, g in itertools.product(MODEL_ORDER, grid))


class HypothesisPredictor:
    """
    Action ids an observed agent would choose at a node if it were the given
    augmented type. Equilibria for the satisficing hypotheses are solved with
    the robust agent at its own type and every other agent at the hypothesized
    one.
    """

    def __init__(self, tree: GameTree, robust_agent: int, robust_gamma: float, cfg: GameConfig | None = None):
        self.tree = tree
        self.robust_agent = robust_agent
        self.robust_gamma = check_type(robust_gamma)
        self.cfg = cfg or tree.cfg
        self._equilibria: dict[float, EquilibriumSolution] = {}
        self._planners: dict[tuple, Level1Planner] = {}

    def equilibrium(self, gamma: float) -> EquilibriumSolution:
        if gamma not in self._equilibria:
            types = [self.robust_gamma if i == self.robust_agent else gamma for i in range(self.tree.n_agents)]
            self._equilibria[gamma] = solve_equilibrium(self.tree, types, self.cfg)
        return self._equilibria[gamma]

    def _level1(self, node: GameNode, agent: int, gamma: float) -> tuple[int, ...]:
        beliefs = history_beliefs(node, agent, self.cfg)
        key = (agent, gamma, tuple(sorted(beliefs.items())))
        try:
            if key not in self._planners:
                self._planners[key] = Level1Planner(self.tree, agent, gamma, beliefs, self.cfg)
        except EmptyBelief:
            return ()
        planner = self._planners[key]
        if self.cfg.l1_expectation:
            return planner.tie_set(node)
        return (planner.choice(node),)

    def predict(self, node: GameNode, agent: int, hypothesis: AugmentedType,
                realized: Sequence[int] | None = None) -> tuple[int, ...]:
        """``realized`` is the joint actually played at ``node`` when it is already in the past."""
        model, gamma = hypothesis.model, hypothesis.gamma
        if model in (BehaviorModel.AC, BehaviorModel.NAC):
            return automaton_support(model.value, node, agent, gamma, self.cfg)[1]
        if model == BehaviorModel.LEVEL1:
            return self._level1(node, agent, gamma)
        rule = sspe_admissible if model == BehaviorModel.SSPE else mspe_admissible
        return rule(self.equilibrium(gamma), node, agent, realized)

    def consistent(self, obs: Observation, agent: int, hypothesis: AugmentedType,
                   realized: Sequence[int] | None = None) -> bool:
        predicted = self.predict(obs.node, agent, hypothesis, realized)
        if obs.action is not None:
            return obs.action in predicted
        return any(obs.node.maneuver_of(agent, i) == obs.maneuver for i in predicted)


def filter_consistent(history, observed: int, predictor: HypothesisPredictor,
                      candidates: BeliefSet | None = None, slack: int | None = None) -> BeliefSet:
    """
    Augmented types whose predictions contain the observed agent's play at
    every stage, allowing ``slack`` mismatching stages.
    """
    cfg = predictor.cfg
    slack = cfg.robust_slack if slack is None else slack
    candidates = candidates if candidates is not None else expand_types(cfg.type_grid)
    observations = history.observations(observed)
    joints = [joint for _, joint in history.steps] if isinstance(history, History) else [None] * len(observations)

    kept = []
    for hypothesis in candidates:
        misses = 0
        for obs, joint in zip(observations, joints):
            if not predictor.consistent(obs, observed, hypothesis, joint):
                misses += 1
                if misses > slack:
                    break
        if misses <= slack:
            kept.append(hypothesis)
    logger.debug("agent %d: %d of %d hypotheses consistent", observed, len(kept), len(candidates))
    return BeliefSet.of(kept)
