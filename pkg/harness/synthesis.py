# harness/synthesis.py
"""Scenario games played closed-loop and returned as observed-trajectory records."""
from __future__ import annotations

import itertools
import logging

import numpy as np

from gamecore.config import GameConfig
from gamecore.tree import History

from .constants import RECORD_SCENARIOS
from .ingest import TIME_DECIMALS, GameRecord
from .policies import Model
from .scenarios import ScenarioSpec
from .simulation import run_scenario, scenario_config, scenario_tree

logger = logging.getLogger(__name__)


def record_from_play(game_id: str, tag: str, node, paths) -> GameRecord:
    """
    Sample arrays along the play ending at ``node``. Each stage boundary holds
    the exact state the next stage starts from.
    """
    steps = History(node).steps
    root = steps[0][0] if steps else node
    n_agents = root.n_agents
    columns = {k: [[] for _ in range(n_agents)] for k in ("x", "y", "speed", "accel", "theta")}
    for i, state in enumerate(root.states):
        for key, val in (("x", state.x), ("y", state.y), ("speed", state.speed), ("accel", state.ax),
                         ("theta", state.theta)):
            columns[key][i].append([val])
    t = [np.zeros(1)]
    for stage, (parent, joint) in enumerate(steps):
        for i, traj in enumerate(parent.joint_trajectories(joint)):
            columns["x"][i].append(traj.x[1:])
            columns["y"][i].append(traj.y[1:])
            columns["speed"][i].append(traj.v[1:])
            columns["accel"][i].append(traj.a[1:])
            columns["theta"][i].append(traj.theta[1:])
        t.append(stage * parent.cfg.period + parent.action(0, joint[0]).t[1:])
    return GameRecord(
        game_id=game_id,
        scenario=tag,
        agents=tuple(range(n_agents)),
        t=np.round(np.concatenate(t), TIME_DECIMALS),
        paths=tuple(paths),
        **{k: np.vstack([np.concatenate(parts) for parts in per_agent]) for k, per_agent in columns.items()},
    )


def synthesize_records(spec: ScenarioSpec, model, cfg: GameConfig | None = None, types=None, speeds=None,
                       seed: int = 0, tag: str = "LT") -> list[GameRecord]:
    """
    One record per (initial point, type combination) whose closed-loop play
    completes the horizon; crashed and stuck plays are left out.
    """
    if tag not in RECORD_SCENARIOS:
        raise ValueError(f"record scenario must be one of {', '.join(RECORD_SCENARIOS)}")
    model = Model(model)
    cfg = scenario_config(spec, cfg)
    grid = [tuple(speeds)] if speeds is not None else spec.initial_grid()
    combos = [tuple(types)] if types is not None else list(itertools.product(cfg.type_grid, repeat=spec.n_agents))

    records = []
    for init_index, point in enumerate(grid):
        tree = scenario_tree(spec, point, cfg)
        for ci, combo in enumerate(combos):
            cell = init_index * len(combos) + ci
            outcome = run_scenario(spec, point, combo, model, seed=seed, cell=cell, tree=tree)
            node = tree.node(outcome.history_id)
            if outcome.crash or not node.is_leaf:
                logger.info("%s %s cell %d: play ended early, no record", spec.id, model.value, cell)
                continue
            records.append(record_from_play(f"{spec.id}-{model.value}-{cell}", tag, node, spec.paths))
    return records
