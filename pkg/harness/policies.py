# harness/policies.py
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from django.conf import settings
from django.db import models

from gamecore.config import GameConfig
from gamecore.tree import GameNode, GameTree, History
from nonstrategic.automata import AutomatonKind, Level0Agent
from nonstrategic.baselines import maxmax_support
from robust.hypotheses import HypothesisPredictor
from robust.planner import robust_response
from strategic.constants import QLK_LAMBDA
from strategic.equilibria import EquilibriumSolution, mspe_admissible, solve_equilibrium, sspe_admissible
from strategic.exceptions import EmptyBelief
from strategic.levelk import Level1Planner, history_beliefs
from strategic.qlk import QLkPlanner

logger = logging.getLogger(__name__)


class Model(models.TextChoices):
    LEVEL1 = "level1", "dLk(A)"
    SSPE = "sspe", "SSPE"
    MSPE = "mspe", "MSPE"
    QLK = "qlk", "QLk(level-1)"
    ROBUST = "robust", "Robust"
    SPNE = "spne", "SPNE"
    MAXMAX = "maxmax", "Maxmax"
    AC = "ac", "AC"
    NAC = "nac", "NAC"


STUDIED_MODELS = (Model.LEVEL1, Model.SSPE, Model.MSPE, Model.QLK, Model.ROBUST)
BASELINE_MODELS = (Model.SPNE, Model.MAXMAX, Model.AC, Model.NAC)
EQUILIBRIUM_MODELS = (Model.SPNE, Model.SSPE, Model.MSPE)


def parse_model(name: str) -> Model:
    try:
        return Model(str(name).strip().lower())
    except ValueError:
        studied = ", ".join(m.value for m in STUDIED_MODELS)
        baselines = ", ".join(m.value for m in BASELINE_MODELS)
        raise ValueError(f"unknown model {name!r}; models: {studied}; baselines: {baselines}") from None


def draw(ids: Sequence[int], rng: np.random.Generator | None) -> int:
    """Uniform pick from a support; the lowest id without a generator."""
    if not ids:
        raise ValueError("empty support")
    if rng is None or len(ids) == 1:
        return int(ids[0])
    return int(ids[rng.integers(len(ids))])


# ----- per-agent policies -----

class Policy:
    agent: int

    def act(self, node: GameNode, rng: np.random.Generator | None = None) -> int:
        raise NotImplementedError


class EquilibriumPolicy(Policy):
    """Complete-information play: the equilibrium action (spne) or a draw from the satisficing set."""

    def __init__(self, solution: EquilibriumSolution, agent: int, model: Model):
        self.solution = solution
        self.agent = agent
        self.model = Model(model)

    def support(self, node: GameNode) -> tuple[int, ...]:
        if self.model == Model.SPNE:
            return (self.solution.choice[node.history_id][self.agent],)
        rule = sspe_admissible if self.model == Model.SSPE else mspe_admissible
        return rule(self.solution, node, self.agent)

    def act(self, node, rng=None):
        return draw(self.support(node), rng)


class Level1Policy(Policy):
    def __init__(self, tree: GameTree, agent: int, gamma: float, cfg: GameConfig):
        self.tree = tree
        self.agent = agent
        self.gamma = gamma
        self.cfg = cfg
        self._planners: dict[tuple, Level1Planner] = {}

    def planner(self, node: GameNode) -> Level1Planner:
        beliefs = history_beliefs(node, self.agent, self.cfg)
        key = tuple(sorted(beliefs.items()))
        if key not in self._planners:
            try:
                self._planners[key] = Level1Planner(self.tree, self.agent, self.gamma, beliefs, self.cfg)
            except EmptyBelief as exc:
                logger.warning("level-1 agent %d at %s: %s; resetting to the full belief",
                               self.agent, node.history_id, exc)
                self._planners[key] = Level1Planner(self.tree, self.agent, self.gamma, None, self.cfg)
        return self._planners[key]

    def act(self, node, rng=None):
        return self.planner(node).choice(node)


class RobustPolicy(Policy):
    def __init__(self, tree: GameTree, agent: int, gamma: float, cfg: GameConfig):
        self.tree = tree
        self.agent = agent
        self.gamma = gamma
        self.cfg = cfg
        self.predictor = HypothesisPredictor(tree, agent, gamma, cfg)

    def act(self, node, rng=None):
        return robust_response(History(node), None, self.gamma, self.tree, self.cfg, self.agent, self.predictor).choice


class QLkPolicy(Policy):
    def __init__(self, tree: GameTree, agent: int, types: Sequence[float], lam: float, cfg: GameConfig):
        self.agent = agent
        self.planner = QLkPlanner(tree, agent, types, lam, cfg)

    def act(self, node, rng=None):
        dist = self.planner.distribution(node)
        ids = sorted(dist)
        if rng is None:
            return max(ids, key=lambda i: (dist[i], -i))
        probs = np.array([dist[i] for i in ids])
        return int(rng.choice(ids, p=probs / probs.sum()))


class MaxmaxPolicy(Policy):
    def __init__(self, agent: int, gamma: float, cfg: GameConfig):
        self.agent = agent
        self.gamma = gamma
        self.cfg = cfg

    def act(self, node, rng=None):
        return draw(maxmax_support(node, self.agent, self.gamma, self.cfg), rng)


class AutomatonPolicy(Policy):
    def __init__(self, automaton: Level0Agent, cfg: GameConfig):
        self.agent = automaton.index
        self.automaton = automaton
        self.cfg = cfg

    def act(self, node, rng=None):
        return self.automaton.act(node, self.cfg, rng)


# ----- populations -----

def qlk_lambda() -> float:
    return getattr(settings, "STRATEGIC_QLK_LAMBDA", QLK_LAMBDA)


def build_population(scenario, tree: GameTree, model, types: Sequence[float], cfg: GameConfig | None = None,
                     lam: float | None = None, solution: EquilibriumSolution | None = None) -> list[Policy]:
    """
    One policy per agent. Equilibrium models bind every agent; any other model
    binds the scenario's ego agents and leaves the rest to the background
    automaton with its scripted switches.
    """
    model = Model(model)
    cfg = cfg or tree.cfg
    if len(types) != tree.n_agents:
        raise ValueError(f"{len(types)} types given for {tree.n_agents} agents")

    if model in EQUILIBRIUM_MODELS:
        solution = solution or solve_equilibrium(tree, types, cfg)
        return [EquilibriumPolicy(solution, i, model) for i in range(tree.n_agents)]

    lam = qlk_lambda() if lam is None else lam
    population: list[Policy] = []
    for i, (spec, gamma) in enumerate(zip(scenario.agents, types)):
        if not spec.ego:
            automaton = Level0Agent.from_script(i, scenario.background, gamma, scenario.switches)
            population.append(AutomatonPolicy(automaton, cfg))
        elif model == Model.LEVEL1:
            population.append(Level1Policy(tree, i, gamma, cfg))
        elif model == Model.ROBUST:
            population.append(RobustPolicy(tree, i, gamma, cfg))
        elif model == Model.QLK:
            population.append(QLkPolicy(tree, i, types, lam, cfg))
        elif model == Model.MAXMAX:
            population.append(MaxmaxPolicy(i, gamma, cfg))
        else:
            kind = AutomatonKind.AC if model == Model.AC else AutomatonKind.NAC
            population.append(AutomatonPolicy(Level0Agent(i, kind, gamma), cfg))
    return population
