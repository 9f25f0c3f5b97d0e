# strategic/equilibria.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gamecore.config import GameConfig
from gamecore.constants import TOL
from gamecore.tree import GameNode, GameTree
from gamecore.utilities import Returns, check_type, safety_value, stage_return, value

from .constants import NASH_EPS
from .exceptions import NoPureEquilibrium
from .solutions import SolutionConcept, SolutionSet

logger = logging.getLogger(__name__)


@dataclass
class EquilibriumSolution:
    """
    Backward-induction result: the equilibrium joint action and the
    un-normalized returns of every agent at each decision node.
    """

    tree: GameTree
    types: tuple[float, ...]
    cfg: GameConfig
    choice: dict[str, tuple[int, ...]] = field(default_factory=dict)
    returns: dict[str, tuple[Returns, ...]] = field(default_factory=dict)
    flagged: list[str] = field(default_factory=list)

    def child_returns(self, node: GameNode, joint: Sequence[int]) -> tuple[Returns, ...]:
        child = node.child(joint)
        if child.is_terminal:
            return tuple(child.terminal_return(i, g) for i, g in enumerate(self.types))
        return self.returns[child.history_id]

    def joint_returns(self, node: GameNode, joint: Sequence[int]) -> tuple[Returns, ...]:
        steps = node.step_utilities(joint)
        after = self.child_returns(node, joint)
        return tuple(stage_return(steps[i], g, after[i], self.cfg) for i, g in enumerate(self.types))

    def deviation_joint(self, node: GameNode, agent: int, idx: int) -> tuple[int, ...]:
        return _replace(self.choice[node.history_id], agent, idx)

    def deviation(self, node: GameNode, agent: int, idx: int) -> Returns:
        """Returns of ``agent`` playing ``idx`` at ``node`` against the others' equilibrium play, equilibrium after."""
        return self.joint_returns(node, self.deviation_joint(node, agent, idx))[agent]

    def value(self, node: GameNode, agent: int) -> float:
        return value(self.returns[node.history_id][agent], node.remaining, self.types[agent], self.cfg)

    def path(self) -> list[str]:
        node, out = self.tree.root, []
        while not node.is_terminal:
            out.append(node.history_id)
            node = node.child(self.choice[node.history_id])
        out.append(node.history_id)
        return out

    def profile(self) -> dict[str, tuple[int, ...]]:
        return dict(self.choice)

    def to_solution_set(self) -> SolutionSet:
        root = self.tree.root
        return SolutionSet(
            concept=SolutionConcept.SPNE,
            entries={h: {i: (a,) for i, a in enumerate(joint)} for h, joint in self.choice.items()},
            flagged=tuple(self.flagged),
            meta={
                "types": list(self.types),
                "path": self.path(),
                "values": [self.value(root, i) for i in range(root.n_agents)],
            },
        )


def _check_types(tree: GameTree, types: Sequence[float]) -> tuple[float, ...]:
    types = tuple(check_type(g) for g in types)
    if len(types) != tree.n_agents:
        raise ValueError(f"{len(types)} types given for {tree.n_agents} agents")
    return types


# ----- stage games -----

def stage_payoffs(solution: EquilibriumSolution, node: GameNode) -> np.ndarray:
    """Normalized values indexed by joint action, last axis the agent."""
    counts = tuple(len(acts) for acts in node.actions)
    values = np.empty(counts + (node.n_agents,))
    for joint in node.joint_actions():
        rets = solution.joint_returns(node, joint)
        values[joint] = [value(r, node.remaining, g, solution.cfg) for r, g in zip(rets, solution.types)]
    return values


def unilateral_regret(values: np.ndarray) -> np.ndarray:
    """Gain of the best unilateral deviation for every cell and agent."""
    n = values.shape[-1]
    return np.stack(
        [values[..., i].max(axis=i, keepdims=True) - values[..., i] for i in range(n)],
        axis=-1,
    )


def select_equilibrium(values: np.ndarray) -> tuple[int, ...] | None:
    """Pure Nash cell with the largest value sum, lowest joint on ties; None if there is none."""
    stable = np.all(unilateral_regret(values) <= NASH_EPS, axis=-1)
    if not stable.any():
        return None
    cells = np.argwhere(stable)
    welfare = values[stable].sum(axis=-1)
    pick = cells[np.flatnonzero(welfare >= welfare.max() - TOL)[0]]
    return tuple(int(a) for a in pick)


def least_regret_cell(values: np.ndarray) -> tuple[int, ...]:
    worst = unilateral_regret(values).max(axis=-1)
    cells = np.argwhere(worst <= worst.min() + TOL)
    return tuple(int(a) for a in cells[0])


def solve_equilibrium(tree: GameTree, types: Sequence[float], cfg: GameConfig | None = None) -> EquilibriumSolution:
    cfg = cfg or tree.cfg
    solution = EquilibriumSolution(tree, _check_types(tree, types), cfg)

    for node in reversed(tree.nodes):
        if node.is_terminal:
            continue
        values = stage_payoffs(solution, node)
        joint = select_equilibrium(values)
        if joint is None:
            if not cfg.equilibrium_fallback:
                raise NoPureEquilibrium(f"stage game at {node.history_id} has no pure Nash cell")
            joint = least_regret_cell(values)
            solution.flagged.append(node.history_id)
            logger.warning("no pure equilibrium at %s; using least-regret cell %s", node.history_id, joint)
        solution.choice[node.history_id] = joint
        solution.returns[node.history_id] = solution.joint_returns(node, joint)

    logger.debug("equilibrium for types %s: path %s", solution.types, solution.path())
    return solution


def spne(tree: GameTree, types: Sequence[float], cfg: GameConfig | None = None) -> SolutionSet:
    return solve_equilibrium(tree, types, cfg).to_solution_set()


# ----- satisficing sets -----

def reference_response(solution: EquilibriumSolution, node: GameNode, agent: int,
                       against: Sequence[int] | None = None) -> tuple[tuple[int, ...], int]:
    """
    Joint the satisficing tests are taken against and the agent's reference
    action in it. Without ``against`` that is the equilibrium cell; otherwise
    the others play ``against`` and the reference is the agent's best reply
    (lowest id on ties).
    """
    if against is None:
        joint = solution.choice[node.history_id]
        return joint, joint[agent]
    against = tuple(against)

    def score(idx):
        ret = solution.joint_returns(node, _replace(against, agent, idx))[agent]
        return value(ret, node.remaining, solution.types[agent], solution.cfg)

    scores = [score(i) for i in node.action_ids(agent)]
    top = max(scores)
    best = next(i for i, s in enumerate(scores) if s >= top - TOL)
    return _replace(against, agent, best), best


def _replace(joint: Sequence[int], agent: int, idx: int) -> tuple[int, ...]:
    out = list(joint)
    out[agent] = idx
    return tuple(out)


def sspe_admissible(solution: EquilibriumSolution, node: GameNode, agent: int,
                    against: Sequence[int] | None = None) -> tuple[int, ...]:
    cfg, gamma = solution.cfg, solution.types[agent]
    star, _ = reference_response(solution, node, agent, against)

    def safety(joint):
        if cfg.sspe_step_level:
            return node.step_utilities(joint)[agent].safety
        return safety_value(solution.joint_returns(node, joint)[agent], node.remaining, cfg)

    threshold = min(safety(star), gamma)
    return tuple(i for i in node.action_ids(agent) if safety(_replace(star, agent, i)) >= threshold - TOL)


def mspe_admissible(solution: EquilibriumSolution, node: GameNode, agent: int,
                    against: Sequence[int] | None = None) -> tuple[int, ...]:
    cfg, gamma = solution.cfg, solution.types[agent]
    star, own = reference_response(solution, node, agent, against)
    maneuver = node.maneuver_of(agent, own)

    def returns(idx):
        return solution.joint_returns(node, _replace(star, agent, idx))[agent]

    def lhs(idx):
        if cfg.mspe_lhs_safety:
            return safety_value(returns(idx), node.remaining, cfg)
        return value(returns(idx), node.remaining, gamma, cfg)

    others = [i for i in node.action_ids(agent) if node.maneuver_of(agent, i) != maneuver]
    best_other = max((value(returns(i), node.remaining, gamma, cfg) for i in others), default=-np.inf)
    return tuple(
        i for i in node.maneuver_ids(agent, maneuver)
        if lhs(i) - best_other > TOL
    )


def _satisficing(concept, rule, tree, types, cfg, solution) -> SolutionSet:
    solution = solution or solve_equilibrium(tree, types, cfg)
    entries = {}
    for node in tree.decision_nodes:
        entries[node.history_id] = {i: rule(solution, node, i) for i in range(node.n_agents)}
    return SolutionSet(
        concept=concept,
        entries=entries,
        flagged=tuple(solution.flagged),
        meta={"types": list(solution.types), "equilibrium_path": solution.path()},
    )


def sspe_set(tree: GameTree, types: Sequence[float], cfg: GameConfig | None = None,
             solution: EquilibriumSolution | None = None) -> SolutionSet:
    return _satisficing(SolutionConcept.SSPE, sspe_admissible, tree, types, cfg, solution)


def mspe_set(tree: GameTree, types: Sequence[float], cfg: GameConfig | None = None,
             solution: EquilibriumSolution | None = None) -> SolutionSet:
    return _satisficing(SolutionConcept.MSPE, mspe_admissible, tree, types, cfg, solution)
