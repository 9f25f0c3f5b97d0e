# oracle/filters.py
"""
Reference admissible sets and chosen actions, computed by walking whole
subtrees and valuing each candidate with ``discounted_value`` on an explicit
profile. Nothing here calls the production solvers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from gamecore.constants import TOL
from gamecore.tree import History
from gamecore.utilities import StepUtilities, aggregate, check_type, discounted_value, safety_utility
from kinematics.primitives import ManeuverClass
from kinematics.services import min_gap

from .constants import AUTOMATA, MODEL_ORDER, NODE_LIMIT
from .exceptions import TooLarge
from .profiles import overlay


@dataclass(frozen=True)
class Reference:
    choice: int
    scores: dict[int, float]
    fallback: bool = False

    def tie_set(self) -> tuple[int, ...]:
        top = self.scores[self.choice]
        return tuple(i for i, s in self.scores.items() if s >= top - TOL)


def _subtree(node, limit: int | None = None) -> list:
    """Decision nodes under ``node`` (itself included), deepest first."""
    limit = NODE_LIMIT if limit is None else limit
    out, stack = [], [node]
    while stack:
        current = stack.pop()
        if current.is_terminal:
            continue
        out.append(current)
        if len(out) > limit:
            raise TooLarge(f"subtree at {node.history_id} has more than {limit} decision nodes")
        stack.extend(current.children.values())
    return sorted(out, key=lambda n: (-n.depth, n.history_id))


def _first_top(scores: Mapping[int, float]) -> int:
    top = max(scores.values())
    return next(i for i in sorted(scores) if scores[i] >= top - TOL)


def _with(joint: Sequence[int], agent: int, idx: int) -> tuple[int, ...]:
    out = list(joint)
    out[agent] = idx
    return tuple(out)


def _safety(node, profile, agent: int, cfg) -> float:
    # γ = 1 never selects progress, so this is the discounted safety alone
    return discounted_value(node, profile, agent, 1.0, cfg)


def _progress(node, profile, agent: int, cfg) -> float:
    return discounted_value(node, profile, agent, -math.inf, cfg)


# ----- level-0 automata -----

def _ids(node, agent: int, maneuver: ManeuverClass) -> tuple[int, ...]:
    return tuple(i for i, tr in enumerate(node.actions[agent]) if tr.maneuver == maneuver)


def step_safety(node, agent: int, idx: int, cfg) -> float:
    own = node.actions[agent][idx]
    gap = math.inf
    for other, trajectories in enumerate(node.actions):
        if other != agent:
            gap = min([gap] + [min_gap(own, tr) for tr in trajectories])
    return safety_utility(gap, cfg)


def oracle_level0(node, agent: int, kind: str, gamma: float, cfg) -> tuple[int, ...]:
    """Action ids an AC or NAC automaton of type ``gamma`` randomizes over at ``node``."""
    if kind not in AUTOMATA:
        raise ValueError(f"unknown automaton {kind!r}")
    ids = {m: _ids(node, agent, m) for m in (ManeuverClass.WAIT, ManeuverClass.PROCEED)}
    safety = {i: step_safety(node, agent, i, cfg) for i in range(len(node.actions[agent]))}
    best = {m: max((safety[i] for i in found), default=None) for m, found in ids.items()}

    if kind == "AC":
        preferred, other = ManeuverClass.WAIT, ManeuverClass.PROCEED
        b = best[preferred]
        holds = b is not None and (b >= gamma if cfg.ac_condition_direction == "ge" else b <= gamma)
    else:
        preferred, other = ManeuverClass.PROCEED, ManeuverClass.WAIT
        b = best[preferred]
        holds = b is not None and b > gamma

    if holds:
        safe = tuple(i for i in ids[preferred] if safety[i] >= gamma)
        return safe or ids[preferred]
    return ids[other] or ids[preferred]


def oracle_consistent_types(history, agent: int, kind: str, cfg) -> tuple[float, ...]:
    """Grid types whose automaton could have produced every observed maneuver."""
    observations = history.observations(agent)
    return tuple(
        gamma for gamma in cfg.type_grid
        if all(
            any(obs.node.actions[agent][i].maneuver == obs.maneuver
                for i in oracle_level0(obs.node, agent, kind, gamma, cfg))
            for obs in observations
        )
    )


# ----- level-1 -----

def _paths(node, first_joints: Iterable[Sequence[int]], step):
    """
    Every (probability, {history: joint}) continuation from ``node``: the
    first stage uniform over ``first_joints``, later stages uniform over
    ``step(n)``.
    """
    first = list(first_joints)
    for joint in first:
        child = node.child(joint)
        if child.is_terminal:
            yield 1.0 / len(first), {node.history_id: tuple(joint)}
            continue
        for p, rest in _paths(child, step(child), step):
            yield p / len(first), {node.history_id: tuple(joint), **rest}


def oracle_level1(node, agent: int, gamma: float, cfg) -> Reference | None:
    """
    Level-1 choice at ``node`` against automata restricted to the types the
    history leaves consistent; None when some opponent has no such type.
    """
    gamma = check_type(gamma)
    history = History(node)
    types = {}
    for j in range(node.n_agents):
        if j == agent:
            continue
        types[j] = {kind: oracle_consistent_types(history, j, kind, cfg) for kind in AUTOMATA}
        if not any(types[j].values()):
            return None

    def opponent_ids(n, j):
        return tuple(sorted({i for kind, grid in types[j].items() for g in grid
                             for i in oracle_level0(n, j, kind, g, cfg)}))

    def joints(n, own):
        per_agent = [(own,) if j == agent else opponent_ids(n, j) for j in range(n.n_agents)]
        return list(itertools.product(*per_agent))

    profile: dict[str, tuple[int, ...]] = {}
    chosen: dict[str, int] = {}
    refs: dict[str, Reference] = {}
    for n in _subtree(node):
        h = n.history_id
        scores, behind = {}, {}
        for own in n.action_ids(agent):
            if cfg.l1_expectation:
                paths = list(_paths(n, joints(n, own), lambda m: joints(m, chosen[m.history_id])))
                if cfg.aggregate_per_step:
                    scores[own] = sum(p * discounted_value(n, pr, agent, gamma, cfg) for p, pr in paths)
                else:
                    s = sum(p * _safety(n, pr, agent, cfg) for p, pr in paths)
                    g = sum(p * _progress(n, pr, agent, cfg) for p, pr in paths)
                    scores[own] = aggregate(StepUtilities(s, g), gamma)
                continue
            best_v, best_j = None, None
            for joint in joints(n, own):
                v = discounted_value(n, overlay(profile, h, joint), agent, gamma, cfg)
                if best_v is None or v > best_v + TOL:
                    best_v, best_j = v, joint
            scores[own], behind[own] = best_v, best_j
        choice = _first_top(scores)
        chosen[h] = choice
        if not cfg.l1_expectation:
            profile[h] = behind[choice]
        refs[h] = Reference(choice, scores)
    return refs[node.history_id]


def level1_prediction(node, agent: int, gamma: float, cfg) -> tuple[int, ...]:
    ref = oracle_level1(node, agent, gamma, cfg)
    if ref is None:
        return ()
    return ref.tie_set() if cfg.l1_expectation else (ref.choice,)


# ----- satisficing sets -----

def _reference_joint(node, agent: int, gamma: float, profile, against, cfg) -> tuple[int, ...]:
    """The profile's joint at ``node``, or the agent's best reply to ``against``."""
    if against is None:
        return tuple(profile[node.history_id])
    h = node.history_id
    scores = {
        i: discounted_value(node, overlay(profile, h, _with(against, agent, i)), agent, gamma, cfg)
        for i in node.action_ids(agent)
    }
    return _with(against, agent, _first_top(scores))


def oracle_sspe(node, agent: int, types: Sequence[float], profile, cfg,
                against: Sequence[int] | None = None) -> tuple[int, ...]:
    """Own actions keeping safety at or above min(reference safety, own type)."""
    gamma = check_type(types[agent])
    h = node.history_id
    star = _reference_joint(node, agent, gamma, profile, against, cfg)

    def safety(joint):
        if cfg.sspe_step_level:
            return node.step_utilities(joint)[agent].safety
        return _safety(node, overlay(profile, h, joint), agent, cfg)

    threshold = min(safety(star), gamma)
    return tuple(i for i in node.action_ids(agent) if safety(_with(star, agent, i)) >= threshold - TOL)


def oracle_mspe(node, agent: int, types: Sequence[float], profile, cfg,
                against: Sequence[int] | None = None) -> tuple[int, ...]:
    """Actions of the reference maneuver that beat every action of the other maneuver."""
    gamma = check_type(types[agent])
    h = node.history_id
    star = _reference_joint(node, agent, gamma, profile, against, cfg)
    maneuver = node.actions[agent][star[agent]].maneuver

    def played(i):
        return overlay(profile, h, _with(star, agent, i))

    rivals = [
        discounted_value(node, played(i), agent, gamma, cfg)
        for i in node.action_ids(agent) if node.actions[agent][i].maneuver != maneuver
    ]
    best_rival = max(rivals, default=-math.inf)
    kept = []
    for i in _ids(node, agent, maneuver):
        lhs = _safety(node, played(i), agent, cfg) if cfg.mspe_lhs_safety \
            else discounted_value(node, played(i), agent, gamma, cfg)
        if lhs - best_rival > TOL:
            kept.append(i)
    return tuple(kept)


# ----- robust response -----

def _hypothesis(h) -> tuple[str, float]:
    if isinstance(h, tuple):
        return str(h[0]), float(h[1])
    return str(h.model), float(h.gamma)


def _ordered(hypotheses: Iterable) -> list[tuple[str, float]]:
    return sorted({_hypothesis(h) for h in hypotheses}, key=lambda t: (MODEL_ORDER.index(t[0]), t[1]))


@dataclass
class HypothesisOracle:
    """Predictions of an observed agent under each (model, type) hypothesis."""

    robust_agent: int
    robust_gamma: float
    equilibria: Mapping[float, Mapping]   # hypothesized type -> equilibrium profile
    cfg: object
    n_agents: int = 2

    def types(self, gamma: float) -> tuple[float, ...]:
        return tuple(self.robust_gamma if i == self.robust_agent else gamma for i in range(self.n_agents))

    def predict(self, node, agent: int, model: str, gamma: float, realized=None) -> tuple[int, ...]:
        if model in AUTOMATA:
            return oracle_level0(node, agent, model, gamma, self.cfg)
        if model == "level1":
            return level1_prediction(node, agent, gamma, self.cfg)
        rule = oracle_sspe if model == "sspe" else oracle_mspe
        return rule(node, agent, self.types(gamma), self.equilibria[gamma], self.cfg, realized)


def oracle_consistent_hypotheses(history, observed: int, oracle: HypothesisOracle,
                                 slack: int | None = None) -> list[tuple[str, float]]:
    """(model, type) pairs whose predictions miss the observed actions at no more than ``slack`` stages."""
    cfg = oracle.cfg
    slack = cfg.robust_slack if slack is None else slack
    kept = []
    for model, gamma in itertools.product(MODEL_ORDER, cfg.type_grid):
        misses = sum(
            joint[observed] not in oracle.predict(node, observed, model, gamma, joint)
            for node, joint in history.steps
        )
        if misses <= slack:
            kept.append((model, gamma))
    return kept


def oracle_robust(node, agent: int, gamma_r: float, beliefs: Mapping[int, Iterable], oracle: HypothesisOracle,
                  cfg) -> Reference:
    """
    max over own actions of the min over hypothesis combinations of the max
    over the actions they predict; maxmin over all opponent actions where no
    combination predicts anything.
    """
    gamma_r = check_type(gamma_r)
    opponents = [j for j in range(node.n_agents) if j != agent]
    per_opponent = {j: _ordered(beliefs.get(j, ())) for j in opponents}
    empty_belief = any(not per_opponent[j] for j in opponents)
    combos = [] if empty_belief else list(itertools.product(*(per_opponent[j] for j in opponents)))

    profile: dict[str, tuple[int, ...]] = {}
    refs: dict[str, Reference] = {}
    for n in _subtree(node):
        h = n.history_id

        def v(joint):
            return discounted_value(n, overlay(profile, h, joint), agent, gamma_r, cfg)

        predicted = []
        for combo in combos:
            per_agent = [None] * n.n_agents
            for j, (model, g) in zip(opponents, combo):
                per_agent[j] = oracle.predict(n, j, model, g)
            if all(per_agent[j] for j in opponents):
                predicted.append(per_agent)
        fallback = not predicted

        scores, behind = {}, {}
        for own in n.action_ids(agent):
            if fallback:
                full = [(own,) if j == agent else n.action_ids(j) for j in range(n.n_agents)]
                worst_v, worst_j = None, None
                for joint in itertools.product(*full):
                    value = v(joint)
                    if worst_v is None or value < worst_v - TOL:
                        worst_v, worst_j = value, joint
                scores[own], behind[own] = worst_v, worst_j
                continue
            worst_v, worst_j = None, None
            for per_agent in predicted:
                sets = [(own,) if j == agent else per_agent[j] for j in range(n.n_agents)]
                best_v, best_j = None, None
                for joint in itertools.product(*sets):
                    value = v(joint)
                    if best_v is None or value > best_v + TOL:
                        best_v, best_j = value, joint
                if worst_v is None or best_v < worst_v - TOL:
                    worst_v, worst_j = best_v, best_j
            scores[own], behind[own] = worst_v, worst_j

        choice = _first_top(scores)
        profile[h] = behind[choice]
        refs[h] = Reference(choice, scores, fallback)
    return refs[node.history_id]


# ----- dispatch -----

FILTERS = {
    "sspe": oracle_sspe,
    "mspe": oracle_mspe,
    "level1": oracle_level1,
    "robust": oracle_robust,
}


def oracle_filter(concept: str, **instance):
    """Reference result for one concept; AC and NAC take ``gamma`` and return the automaton support."""
    concept = str(concept)
    node = instance.get("node")
    if node is not None:
        _subtree(node)
    if concept in AUTOMATA:
        return oracle_level0(kind=concept, **instance)
    try:
        rule = FILTERS[concept]
    except KeyError:
        raise ValueError(f"no reference filter for {concept!r}") from None
    return rule(**instance)
