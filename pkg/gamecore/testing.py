# gamecore/testing.py
"""Small seeded games shared by the solver test suites and the oracle checks."""
import math

import numpy as np

from kinematics.paths import Path
from kinematics.primitives import VehicleState

from .config import GameConfig
from .tree import GameTree, build_game_tree


def lane(y: float, x0: float = -100.0, x1: float = 300.0) -> Path:
    return Path.from_points([(x0, y), (x1, y)])


def northbound(x: float, y0: float = -100.0, y1: float = 300.0) -> Path:
    return Path.from_points([(x, y0), (x, y1)])


def small_config(stages: int = 2, n_samples: int = 1, **overrides) -> GameConfig:
    """Two-second stages; targets clipped to the reachable band so a moving vehicle keeps both maneuvers."""
    overrides.setdefault("target_band", "reachable")
    return GameConfig(horizon=2.0 * stages, period=2.0, n_samples=n_samples, **overrides)


def parallel_tree(cfg: GameConfig, speeds=(8.0, 8.0), spacing: float = 3.5) -> GameTree:
    states = [VehicleState(x=0.0, y=i * spacing, vx=v) for i, v in enumerate(speeds)]
    paths = [lane(i * spacing) for i in range(len(speeds))]
    return build_game_tree(states, cfg, paths)


def crossing_tree(cfg: GameConfig, start_a=(-18.0, 8.0), start_b=(-16.0, 7.0)) -> GameTree:
    """Agent 0 eastbound on y=0, agent 1 northbound on x=0; each start is (distance before the crossing, speed)."""
    (xa, va), (yb, vb) = start_a, start_b
    states = [
        VehicleState(x=xa, y=0.0, vx=va, theta=0.0),
        VehicleState(x=0.0, y=yb, vx=vb, theta=math.pi / 2),
    ]
    return build_game_tree(states, cfg, [lane(0.0), northbound(0.0)])


def random_tree(seed: int, stages: int = 2, n_samples: int = 1, **overrides) -> GameTree:
    """Two agents approaching a crossing with seeded distances and speeds."""
    rng = np.random.default_rng(seed)
    cfg = small_config(stages=stages, n_samples=n_samples, **overrides)
    start_a = (-float(rng.uniform(8.0, 30.0)), float(rng.choice([0.0, rng.uniform(2.0, 12.0)])))
    start_b = (-float(rng.uniform(8.0, 30.0)), float(rng.uniform(2.0, 12.0)))
    return crossing_tree(cfg, start_a, start_b)
