# gamecore/tree.py
from __future__ import annotations

import itertools
import logging
import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Sequence

from kinematics.exceptions import EmptyActionSet
from kinematics.paths import Path
from kinematics.primitives import KinematicLimits, ManeuverClass, Trajectory, VehicleState
from kinematics.services import generate_trajectories, min_gap

from .config import GameConfig
from .exceptions import Stuck
from .utilities import (
    Returns,
    StepUtilities,
    continuation_utilities,
    joint_step_utilities,
    safety_utility,
    terminal_return,
)

logger = logging.getLogger(__name__)

MANEUVER_ORDER = (ManeuverClass.WAIT, ManeuverClass.PROCEED)
_UNSET = object()


def joint_key(joint: Sequence[int]) -> str:
    return "-".join(str(a) for a in joint)


class GameNode:
    """
    Joint state of all agents at the start of a stage. Action ids index the
    agent's trajectory tuple: wait trajectories first, then proceed, each by
    ascending end speed.
    """

    def __init__(self, tree: "GameTree", node_id: int, depth: int, states: tuple[VehicleState, ...],
                 parent: "GameNode | None" = None, incoming: tuple[int, ...] | None = None):
        self.tree = tree
        self.node_id = node_id
        self.depth = depth
        self.states = states
        self.parent = parent
        self.incoming = incoming
        self.history_id = "h" if parent is None else f"{parent.history_id}/{joint_key(incoming)}"
        self.actions: tuple[tuple[Trajectory, ...], ...] = ()
        self.children: dict[tuple[int, ...], GameNode] = {}
        self.stuck = False
        self._steps: dict = {}
        self._step_safety: dict = {}
        self._continuation = _UNSET

    def __repr__(self):
        return f"<GameNode {self.history_id} depth={self.depth}>"

    @property
    def cfg(self) -> GameConfig:
        return self.tree.cfg

    @property
    def n_agents(self) -> int:
        return len(self.states)

    @property
    def remaining(self) -> int:
        return self.cfg.stages - self.depth

    @property
    def is_leaf(self) -> bool:
        return self.depth >= self.cfg.stages

    @property
    def is_terminal(self) -> bool:
        return self.is_leaf or self.stuck

    # ----- actions -----

    def action(self, agent: int, idx: int) -> Trajectory:
        return self.actions[agent][idx]

    def maneuver_of(self, agent: int, idx: int) -> ManeuverClass:
        return self.actions[agent][idx].maneuver

    def maneuver_ids(self, agent: int, maneuver) -> tuple[int, ...]:
        maneuver = ManeuverClass(maneuver)
        return tuple(i for i, tr in enumerate(self.actions[agent]) if tr.maneuver == maneuver)

    def action_ids(self, agent: int) -> tuple[int, ...]:
        return tuple(range(len(self.actions[agent])))

    def joint_actions(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(len(a)) for a in self.actions)))

    def joint_trajectories(self, joint: Sequence[int]) -> tuple[Trajectory, ...]:
        return tuple(self.actions[i][a] for i, a in enumerate(joint))

    def child(self, joint: Sequence[int]) -> "GameNode":
        return self.children[tuple(joint)]

    # ----- utilities -----

    def step_utilities(self, joint: Sequence[int]) -> tuple[StepUtilities, ...]:
        joint = tuple(joint)
        if joint not in self._steps:
            self._steps[joint] = joint_step_utilities(self.joint_trajectories(joint), self.cfg)
        return self._steps[joint]

    def incoming_trajectories(self) -> tuple[Trajectory, ...]:
        if self.parent is None:
            return ()
        return self.parent.joint_trajectories(self.incoming)

    def continuation(self) -> tuple[StepUtilities, ...] | None:
        """Frozen-extension utilities of the incoming joint trajectories (terminal nodes)."""
        if self._continuation is _UNSET:
            stages = self.remaining + self.cfg.cont_stages
            if self.parent is None or stages <= 0:
                self._continuation = None
            else:
                self._continuation = continuation_utilities(self.incoming_trajectories(), self.cfg, stages)
        return self._continuation

    def terminal_return(self, agent: int, gamma: float) -> Returns:
        cont = self.continuation()
        if cont is None:
            return Returns()
        return terminal_return(cont[agent], self.remaining + self.cfg.cont_stages, gamma, self.cfg)

    def step_safety(self, agent: int, idx: int) -> float:
        """Safety of one own trajectory against the worst of every opponent trajectory at this node."""
        key = (agent, idx)
        if key not in self._step_safety:
            own = self.actions[agent][idx]
            gap = math.inf
            for other in range(self.n_agents):
                if other == agent:
                    continue
                for tr in self.actions[other]:
                    gap = min(gap, min_gap(own, tr))
            self._step_safety[key] = safety_utility(gap, self.cfg)
        return self._step_safety[key]

    def max_step_safety(self, agent: int, maneuver) -> float | None:
        ids = self.maneuver_ids(agent, maneuver)
        if not ids:
            return None
        return max(self.step_safety(agent, i) for i in ids)

    def to_dict(self) -> dict:
        return {
            "id": self.node_id,
            "history": self.history_id,
            "depth": self.depth,
            "stuck": self.stuck,
            "states": [s.to_dict() for s in self.states],
            "actions": [[{"id": i, **tr.describe()} for i, tr in enumerate(acts)] for acts in self.actions],
            "children": {joint_key(j): c.node_id for j, c in self.children.items()},
        }


@dataclass(frozen=True)
class Observation:
    """One stage of an agent's play: the node, its maneuver, and the action id when known."""

    node: GameNode
    maneuver: ManeuverClass
    action: int | None = None


class History:
    """The node sequence and joint actions leading from the root to ``node``."""

    def __init__(self, node: GameNode):
        self.node = node
        steps = []
        current = node
        while current.parent is not None:
            steps.append((current.parent, current.incoming))
            current = current.parent
        self.steps: list[tuple[GameNode, tuple[int, ...]]] = steps[::-1]

    def __len__(self):
        return len(self.steps)

    @property
    def history_id(self) -> str:
        return self.node.history_id

    def observations(self, agent: int) -> list[Observation]:
        return [Observation(n, n.maneuver_of(agent, joint[agent]), joint[agent]) for n, joint in self.steps]

    def prefixes(self):
        for k in range(len(self.steps) + 1):
            yield History(self.steps[k][0]) if k < len(self.steps) else self


class ObservedHistory:
    """
    A history known only at maneuver level (recorded data), one node per
    observed stage.
    """

    def __init__(self, steps: Sequence[tuple[GameNode, Sequence]]):
        self.steps = [(node, tuple(ManeuverClass(m) for m in maneuvers)) for node, maneuvers in steps]

    def __len__(self):
        return len(self.steps)

    def observations(self, agent: int) -> list[Observation]:
        return [Observation(node, maneuvers[agent]) for node, maneuvers in self.steps]


class GameTree:
    def __init__(self, cfg: GameConfig, paths: Sequence[Path]):
        self.cfg = cfg
        self.paths = tuple(paths)
        self.nodes: list[GameNode] = []
        self.by_history: dict[str, GameNode] = {}
        self.root: GameNode | None = None

    def _add(self, node: GameNode):
        self.nodes.append(node)
        self.by_history[node.history_id] = node

    @property
    def n_agents(self) -> int:
        return self.root.n_agents

    def node(self, history_id: str) -> GameNode:
        return self.by_history[history_id]

    @property
    def decision_nodes(self) -> list[GameNode]:
        return [n for n in self.nodes if not n.is_terminal]

    @property
    def leaves(self) -> list[GameNode]:
        return [n for n in self.nodes if n.is_leaf]

    @property
    def stuck_nodes(self) -> list[GameNode]:
        return [n for n in self.nodes if n.stuck]

    def counts_by_depth(self) -> dict[int, int]:
        return dict(sorted(Counter(n.depth for n in self.nodes).items()))

    def to_json(self) -> dict:
        return {
            "stages": self.cfg.stages,
            "agents": self.n_agents,
            "nodes": [n.to_dict() for n in self.nodes],
        }


def _expand(node: GameNode, cfg: GameConfig):
    per_agent = []
    for agent, state in enumerate(node.states):
        acts: list[Trajectory] = []
        for maneuver in MANEUVER_ORDER:
            try:
                acts.extend(generate_trajectories(
                    state, node.tree.paths[agent], maneuver, cfg.limits, cfg.n_samples, cfg.period, cfg.dt,
                    cfg.target_band,
                ))
            except EmptyActionSet as exc:
                logger.debug("%s agent %d: %s", node.history_id, agent, exc)
        per_agent.append(tuple(acts))
    node.actions = tuple(per_agent)
    node.stuck = any(not acts for acts in per_agent)


def build_game_tree(initial: Sequence[VehicleState], cfg: GameConfig, paths: Sequence[Path],
                    limits: KinematicLimits | None = None) -> GameTree:
    """Breadth-first K-stage tree from the joint initial state. Child states are trajectory endpoints."""
    if limits is not None:
        cfg = cfg.with_overrides(limits=limits)
    if len(initial) != len(paths):
        raise ValueError("one path per agent is required")

    tree = GameTree(cfg, paths)
    tree.root = GameNode(tree, 0, 0, tuple(initial))
    tree._add(tree.root)

    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        if node.is_leaf:
            continue
        _expand(node, cfg)
        if node.stuck:
            if node.parent is None:
                raise Stuck("an agent has no feasible trajectory at the initial state")
            continue
        for joint in node.joint_actions():
            ends = tuple(tr.end for tr in node.joint_trajectories(joint))
            child = GameNode(tree, len(tree.nodes), node.depth + 1, ends, node, joint)
            node.children[joint] = child
            tree._add(child)
            queue.append(child)

    stuck = len(tree.stuck_nodes)
    logger.info("game tree: %d agents, nodes per depth %s, %d stuck", tree.n_agents, tree.counts_by_depth(), stuck)
    return tree
