# harness/simulation.py
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings

from gamecore.config import GameConfig
from gamecore.tree import GameNode, GameTree, build_game_tree
from kinematics.primitives import ManeuverClass
from kinematics.services import min_gap

from .constants import CRASH_GAP_M, STUCK_SPEED
from .policies import Model, build_population
from .scenarios import ScenarioSpec, inside_polygon

logger = logging.getLogger(__name__)


def scenario_config(spec: ScenarioSpec, cfg: GameConfig | None = None) -> GameConfig:
    """Game config with the scenario's sampling density, type grid and target band applied."""
    cfg = cfg or GameConfig.from_settings()
    overrides = {}
    if spec.n_samples is not None:
        overrides["n_samples"] = int(spec.n_samples)
    if spec.type_grid is not None:
        overrides["type_grid"] = spec.type_grid
    if spec.target_band is not None:
        overrides["target_band"] = spec.target_band
    return cfg.with_overrides(**overrides) if overrides else cfg


def scenario_tree(spec: ScenarioSpec, speeds, cfg: GameConfig) -> GameTree:
    return build_game_tree(spec.initial_states(speeds), cfg, spec.paths)


def crash_gap() -> float:
    return getattr(settings, "HARNESS_CRASH_GAP_M", CRASH_GAP_M)


def joint_min_gap(trajectories) -> float:
    return min(
        (min_gap(a, b) for a, b in itertools.combinations(trajectories, 2)),
        default=math.inf,
    )


@dataclass
class OutcomeRecord:
    scenario: str
    model: str
    cell: int
    speeds: tuple[float, ...]
    types: tuple[float, ...]
    success: bool = False
    crash: bool = False
    stuck: bool = False
    joints: list[tuple[int, ...]] = field(default_factory=list)
    maneuvers: list[tuple[str, ...]] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)
    history_id: str = "h"

    @property
    def min_gap(self) -> float:
        return min(self.gaps, default=math.inf)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "model": self.model,
            "cell": self.cell,
            "speeds": list(self.speeds),
            "types": list(self.types),
            "success": self.success,
            "crash": self.crash,
            "stuck": self.stuck,
            "actions": [list(j) for j in self.joints],
            "maneuvers": [list(m) for m in self.maneuvers],
            "min_gap": round(self.min_gap, 6) if self.gaps else None,
            "history": self.history_id,
        }


# ----- success predicates -----

def _arc_position(path, state) -> float:
    return path.project(state.x, state.y)[0]


def intersection_cleared(spec: ScenarioSpec, visited: list[GameNode]) -> bool:
    """The turner ends on the exit lane outside the box and nobody is left stopped inside it."""
    final = visited[-1].states
    turner = final[spec.index("left_turner")]
    if inside_polygon(turner.position, spec.polygon) or not inside_polygon(turner.position, spec.goal):
        return False
    return not any(inside_polygon(s.position, spec.polygon) and s.speed < STUCK_SPEED for s in final)


def merged_ahead(spec: ScenarioSpec, visited: list[GameNode]) -> bool:
    final = visited[-1].states
    lane = spec.agents[spec.index("on_lane")].path
    merger = final[spec.index("merger")]
    if not inside_polygon(merger.position, spec.goal):
        return False
    return _arc_position(lane, merger) > _arc_position(lane, final[spec.index("on_lane")])


def pulled_out_after(spec: ScenarioSpec, visited: list[GameNode], joints) -> bool:
    """Vacuous when the parked vehicle never proceeds."""
    parked, coming = spec.index("parked"), spec.index("coming")
    lane = spec.agents[coming].path
    merge_s = lane.project(*spec.merge_point)[0]
    for node, joint in zip(visited, joints):
        if node.maneuver_of(parked, joint[parked]) == ManeuverClass.PROCEED:
            return _arc_position(lane, node.states[coming]) > merge_s
    return True


def evaluate_success(spec: ScenarioSpec, visited: list[GameNode], joints) -> bool:
    if spec.id == "IC":
        return intersection_cleared(spec, visited)
    if spec.id == "MBI":
        return merged_ahead(spec, visited)
    return pulled_out_after(spec, visited, joints)


# ----- closed loop -----

def play(tree: GameTree, population, seed: int = 0, cell: int = 0, gap_limit: float | None = None):
    """
    Walk the tree with every agent's policy choosing per stage. Each child
    node holds the endpoints of the chosen trajectories, so the next stage
    starts exactly where the last one ended.
    """
    gap_limit = crash_gap() if gap_limit is None else gap_limit
    node = tree.root
    visited, joints, gaps = [node], [], []
    crash = False
    for stage in itertools.count():
        if node.is_terminal:
            break
        rng = np.random.default_rng([seed, cell, stage])
        joint = tuple(policy.act(node, rng) for policy in population)
        gap = joint_min_gap(node.joint_trajectories(joint))
        joints.append(joint)
        gaps.append(gap)
        node = node.child(joint)
        visited.append(node)
        if gap <= gap_limit:
            crash = True
            break
    return visited, joints, gaps, crash


def run_scenario(spec: ScenarioSpec, speeds, types, model, cfg: GameConfig | None = None, seed: int = 0,
                 cell: int = 0, tree: GameTree | None = None, lam: float | None = None,
                 solution=None) -> OutcomeRecord:
    """Play one closed-loop game from an initial-speed point with one type per agent."""
    model = Model(model)
    cfg = scenario_config(spec, cfg) if tree is None else tree.cfg
    tree = tree or scenario_tree(spec, speeds, cfg)
    types = tuple(float(g) for g in types)
    population = build_population(spec, tree, model, types, cfg, lam, solution)

    visited, joints, gaps, crash = play(tree, population, seed, cell)
    final = visited[-1]
    record = OutcomeRecord(
        scenario=spec.id,
        model=model.value,
        cell=cell,
        speeds=tuple(float(v) for v in speeds),
        types=types,
        crash=crash,
        stuck=final.stuck,
        joints=joints,
        maneuvers=[
            tuple(node.maneuver_of(i, a).value for i, a in enumerate(joint))
            for node, joint in zip(visited, joints)
        ],
        gaps=gaps,
        history_id=final.history_id,
    )
    if not crash and not final.stuck:
        record.success = evaluate_success(spec, visited, joints)
    logger.debug("%s %s cell %d types %s: %s", spec.id, model.value, cell, types,
                 "crash" if crash else "stuck" if final.stuck else "success" if record.success else "fail")
    return record
