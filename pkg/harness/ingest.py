# harness/ingest.py
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Sequence

import numpy as np
import pandas as pd
from django.conf import settings

from gamecore import constants as game_constants
from kinematics import constants as kin_constants
from kinematics.paths import Path
from kinematics.primitives import ManeuverClass, VehicleState
from kinematics.services import classify_speed_profile

from .constants import MAX_FRAME_GAP_S, RECORD_SCENARIOS, SPEED_DECIMALS, TRAJECTORY_COLUMNS
from .exceptions import GapError, SchemaError

logger = logging.getLogger(__name__)

TIME_DECIMALS = kin_constants.TIME_DECIMALS


def classify_maneuver(t: Sequence[float], v: Sequence[float]) -> ManeuverClass:
    """Wait/proceed label of an observed speed profile, speeds compared at the ingestion resolution."""
    t = np.asarray(t, dtype=float)
    v = np.round(np.asarray(v, dtype=float), SPEED_DECIMALS)
    if len(t) < 2 or len(t) != len(v):
        raise ValueError("a segment needs at least two aligned samples")
    return classify_speed_profile(float(v[0]), float(v[-1]), float(t[-1] - t[0]))


def _wrap(theta: np.ndarray) -> np.ndarray:
    return np.arctan2(np.sin(theta), np.cos(theta))


@dataclass(frozen=True, eq=False)
class GameRecord:
    """
    One observed game, resampled onto a shared grid. Arrays are (agents, samples);
    ``t`` starts at 0 at the game's start time.
    """

    game_id: str
    scenario: str
    agents: tuple[int, ...]
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray
    accel: np.ndarray
    theta: np.ndarray
    paths: tuple[Path, ...] | None = None

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def dt(self) -> float:
        return float(round(self.t[1] - self.t[0], TIME_DECIMALS))

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    def index_at(self, seconds: float) -> int:
        i = int(round(seconds / self.dt))
        if not 0 <= i < len(self.t):
            raise IndexError(f"{seconds}s is outside game {self.game_id}")
        return i

    def state(self, agent: int, index: int) -> VehicleState:
        return VehicleState(
            x=float(self.x[agent, index]),
            y=float(self.y[agent, index]),
            vx=float(self.speed[agent, index]),
            ax=float(self.accel[agent, index]),
            theta=float(self.theta[agent, index]),
        )

    def states(self, index: int) -> list[VehicleState]:
        return [self.state(i, index) for i in range(self.n_agents)]

    def observed_path(self, agent: int) -> Path:
        pts = np.column_stack([self.x[agent], self.y[agent]])
        try:
            return Path(pts)
        except ValueError:
            # never moved: a straight line along the observed heading
            heading = float(self.theta[agent, 0])
            return Path(np.array([pts[0], pts[0] + [math.cos(heading), math.sin(heading)]]))

    def agent_paths(self) -> list[Path]:
        if self.paths is not None:
            return list(self.paths)
        return [self.observed_path(i) for i in range(self.n_agents)]

    def maneuvers(self, agent: int, period: float, stages: int) -> list[ManeuverClass]:
        out = []
        for k in range(stages):
            i0, i1 = self.index_at(k * period), self.index_at((k + 1) * period)
            out.append(classify_maneuver(self.t[i0:i1 + 1], self.speed[agent, i0:i1 + 1]))
        return out


# ----- reading -----

def read_trajectories(csv_path) -> pd.DataFrame:
    header = list(pd.read_csv(csv_path, nrows=0).columns)
    if header != TRAJECTORY_COLUMNS:
        raise SchemaError(f"{FilePath(csv_path).name}: header must be {','.join(TRAJECTORY_COLUMNS)}, got {','.join(header)}")
    frame = pd.read_csv(csv_path)
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1)
    if bad.any():
        raise SchemaError(f"{FilePath(csv_path).name}: non-numeric or missing values in {int(bad.sum())} rows")
    numeric["track_id"] = numeric["track_id"].astype(int)
    numeric = numeric.sort_values(["track_id", "t_s"], kind="mergesort").reset_index(drop=True)
    if numeric.duplicated(["track_id", "t_s"]).any():
        raise SchemaError(f"{FilePath(csv_path).name}: repeated sample times within a track")
    return numeric


def read_manifest(manifest_path) -> list[dict]:
    with open(manifest_path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"manifest: {exc}") from None
    games = data.get("games") if isinstance(data, dict) else None
    if not isinstance(games, list):
        raise SchemaError("manifest must hold a 'games' list")
    seen = set()
    for game in games:
        try:
            gid, scenario, agents, t0 = str(game["id"]), game["scenario"], game["agents"], float(game["t0_s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"manifest game {game!r}: {exc}") from None
        if scenario not in RECORD_SCENARIOS:
            raise SchemaError(f"game {gid}: scenario must be one of {', '.join(RECORD_SCENARIOS)}")
        if not isinstance(agents, list) or not 2 <= len(agents) <= 3 or len(set(agents)) != len(agents):
            raise SchemaError(f"game {gid}: needs two or three distinct track ids")
        if gid in seen:
            raise SchemaError(f"game {gid} appears twice")
        seen.add(gid)
        game["t0_s"] = t0
    return games


def _resample(track: pd.DataFrame, grid: np.ndarray, game_id: str, track_id: int) -> dict:
    t = track["t_s"].to_numpy()
    start, stop = grid[0], grid[-1]
    eps = 10.0 ** -TIME_DECIMALS
    if len(t) == 0 or t[0] > start + eps or t[-1] < stop - eps:
        raise GapError(f"game {game_id}: track {track_id} does not cover [{start:g}, {stop:g}] s")
    lo = int(np.searchsorted(t, start + eps, side="right")) - 1
    hi = int(np.searchsorted(t, stop - eps, side="left"))
    holes = np.diff(t[lo:hi + 1])
    if len(holes) and holes.max() > MAX_FRAME_GAP_S + eps:
        raise GapError(f"game {game_id}: track {track_id} misses {holes.max():.3f} s of frames")

    def sample(column):
        return np.interp(grid, t, track[column].to_numpy())

    vx, vy, ax, ay = sample("vx_ms"), sample("vy_ms"), sample("ax_ms2"), sample("ay_ms2")
    theta = _wrap(np.interp(grid, t, np.unwrap(track["theta_rad"].to_numpy())))
    speed = np.round(np.hypot(vx, vy), SPEED_DECIMALS)
    # longitudinal component along the velocity, or the heading when stopped
    moving = np.hypot(vx, vy) > 1e-9
    ux = np.where(moving, vx / np.where(moving, np.hypot(vx, vy), 1.0), np.cos(theta))
    uy = np.where(moving, vy / np.where(moving, np.hypot(vx, vy), 1.0), np.sin(theta))
    return {
        "x": sample("x_m"), "y": sample("y_m"), "speed": speed,
        "accel": ax * ux + ay * uy, "theta": theta,
    }


def ingest_trajectories(csv_path, manifest_path, horizon: float | None = None,
                        dt: float | None = None) -> list[GameRecord]:
    """Validated games from a trajectory CSV and its manifest, resampled onto a ``dt`` grid over the horizon."""
    horizon = horizon or getattr(settings, "GAME_HORIZON_S", game_constants.HORIZON_S)
    dt = dt or getattr(settings, "KINEMATICS_DT_S", kin_constants.DT_S)
    frame = read_trajectories(csv_path)
    tracks = {int(tid): rows for tid, rows in frame.groupby("track_id", sort=True)}
    steps = int(round(horizon / dt))
    rel = np.round(np.arange(steps + 1) * dt, TIME_DECIMALS)

    records = []
    for game in read_manifest(manifest_path):
        gid, t0 = str(game["id"]), game["t0_s"]
        grid = np.round(t0 + rel, TIME_DECIMALS)
        columns = {k: [] for k in ("x", "y", "speed", "accel", "theta")}
        for tid in game["agents"]:
            if int(tid) not in tracks:
                raise GapError(f"game {gid}: no samples for track {tid}")
            sampled = _resample(tracks[int(tid)], grid, gid, int(tid))
            for k in columns:
                columns[k].append(sampled[k])
        records.append(GameRecord(
            game_id=gid,
            scenario=game["scenario"],
            agents=tuple(int(a) for a in game["agents"]),
            t=rel.copy(),
            **{k: np.vstack(v) for k, v in columns.items()},
        ))
    logger.info("ingested %d games from %s", len(records), FilePath(csv_path).name)
    return records


# ----- writing -----

def track_id(game_index: int, agent: int) -> int:
    return 1000 * (game_index + 1) + agent


def export_records(records: Sequence[GameRecord], csv_path, manifest_path) -> tuple[FilePath, FilePath]:
    """Write records in the trajectory CSV / manifest format, each game starting at t = 0."""
    rows, games = [], []
    for g, record in enumerate(records):
        ids = [track_id(g, i) for i in range(record.n_agents)]
        for i, tid in enumerate(ids):
            c, s = np.cos(record.theta[i]), np.sin(record.theta[i])
            rows.append(pd.DataFrame({
                "track_id": tid,
                "frame": np.round(record.t / record.dt).astype(int),
                "t_s": record.t,
                "x_m": record.x[i],
                "y_m": record.y[i],
                "vx_ms": record.speed[i] * c,
                "vy_ms": record.speed[i] * s,
                "ax_ms2": record.accel[i] * c,
                "ay_ms2": record.accel[i] * s,
                "theta_rad": record.theta[i],
            }))
        games.append({"id": record.game_id, "scenario": record.scenario, "agents": ids, "t0_s": 0.0})

    csv_path, manifest_path = FilePath(csv_path), FilePath(manifest_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=TRAJECTORY_COLUMNS)
    frame[TRAJECTORY_COLUMNS].to_csv(csv_path, index=False, lineterminator="\n")
    manifest_path.write_text(json.dumps({"games": games}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, manifest_path
