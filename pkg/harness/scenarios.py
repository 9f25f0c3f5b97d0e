# harness/scenarios.py
from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np
from django.conf import settings

from kinematics.constants import TARGET_BANDS
from kinematics.paths import Path
from kinematics.primitives import VehicleState
from nonstrategic.automata import AutomatonKind

from .constants import AGENT_COUNTS, ARC_STEP_M, SCENARIO_IDS, SCENARIO_ROLES
from .exceptions import ScenarioError


def inside_polygon(point, polygon: np.ndarray) -> bool:
    """Even-odd ray cast; points on an edge count as inside."""
    x, y = point
    xs, ys = polygon[:, 0], polygon[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    # on an edge
    cross = (xn - xs) * (y - ys) - (yn - ys) * (x - xs)
    within = (np.minimum(xs, xn) - 1e-9 <= x) & (x <= np.maximum(xs, xn) + 1e-9) \
        & (np.minimum(ys, yn) - 1e-9 <= y) & (y <= np.maximum(ys, yn) + 1e-9)
    if np.any((np.abs(cross) <= 1e-9) & within):
        return True
    straddles = (ys > y) != (yn > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = xs + (y - ys) * (xn - xs) / (yn - ys)
    return bool(np.count_nonzero(straddles & (x < x_cross)) % 2)


# ----- path segments -----

def _line(seg) -> np.ndarray:
    (x0, y0), (x1, y1) = seg
    n = max(int(math.ceil(math.hypot(x1 - x0, y1 - y0) / ARC_STEP_M)), 1)
    return np.column_stack([np.linspace(x0, x1, n + 1), np.linspace(y0, y1, n + 1)])


def _arc(seg) -> np.ndarray:
    cx, cy = seg["center"]
    r = float(seg["radius"])
    a0, a1 = math.radians(seg["start_deg"]), math.radians(seg["end_deg"])
    if r <= 0:
        raise ScenarioError("arc radius must be positive")
    n = max(int(math.ceil(abs(a1 - a0) * r / ARC_STEP_M)), 1)
    angles = np.linspace(a0, a1, n + 1)
    return np.column_stack([cx + r * np.cos(angles), cy + r * np.sin(angles)])


def build_path(raw) -> Path:
    """A point list, or a list of {"line": [[x, y], [x, y]]} / {"arc": {...}} segments."""
    try:
        if raw and isinstance(raw[0], dict):
            pieces = []
            for seg in raw:
                if "line" in seg:
                    pieces.append(_line(seg["line"]))
                elif "arc" in seg:
                    pieces.append(_arc(seg["arc"]))
                else:
                    raise ScenarioError(f"unknown path segment {sorted(seg)}")
            return Path(np.vstack(pieces))
        return Path.from_points(raw)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad path: {exc}") from exc


# ----- specs -----

@dataclass(frozen=True, eq=False)
class AgentSpec:
    role: str
    path: Path
    start_s: float
    speeds: tuple[float, ...]
    ego: bool = True

    def state(self, speed: float) -> VehicleState:
        x, y, heading = self.path.locate(self.start_s)
        return VehicleState(x=float(x), y=float(y), vx=float(speed), theta=float(heading))


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    id: str
    agents: tuple[AgentSpec, ...]
    description: str = ""
    polygon: np.ndarray | None = None
    goal: np.ndarray | None = None
    merge_point: tuple[float, float] | None = None
    background: AutomatonKind = AutomatonKind.NAC
    switches: tuple[tuple[int, str], ...] = ()
    n_samples: int | None = None
    type_grid: tuple[float, ...] | None = None
    target_band: str | None = None
    models: tuple[str, ...] = ()
    source: str = ""

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def paths(self) -> list[Path]:
        return [a.path for a in self.agents]

    def index(self, role: str) -> int:
        for i, agent in enumerate(self.agents):
            if agent.role == role:
                return i
        raise ScenarioError(f"{self.id} has no {role!r} agent")

    def initial_grid(self) -> list[tuple[float, ...]]:
        """Every combination of the agents' approach speeds, first agent slowest-varying."""
        return list(itertools.product(*(a.speeds for a in self.agents)))

    def initial_states(self, speeds) -> list[VehicleState]:
        return [a.state(v) for a, v in zip(self.agents, speeds)]

    def with_speeds(self, speeds_per_agent) -> "ScenarioSpec":
        agents = tuple(
            AgentSpec(a.role, a.path, a.start_s, tuple(float(v) for v in speeds), a.ego)
            for a, speeds in zip(self.agents, speeds_per_agent)
        )
        return dataclasses.replace(self, agents=agents)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "agents": [
                {"role": a.role, "start_s": a.start_s, "speeds": list(a.speeds), "ego": a.ego}
                for a in self.agents
            ],
            "background": self.background.value,
            "n_samples": self.n_samples,
            "target_band": self.target_band,
            "source": self.source,
        }


def _array(raw, name: str) -> np.ndarray | None:
    if raw is None:
        return None
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise ScenarioError(f"{name} needs at least three (x, y) vertices")
    return arr


def _agent(raw: dict, index: int) -> AgentSpec:
    try:
        path = build_path(raw["path"])
        speeds = tuple(float(v) for v in raw["speeds"])
    except KeyError as exc:
        raise ScenarioError(f"agent {index} is missing {exc}") from None
    if not speeds or any(v < 0 or not math.isfinite(v) for v in speeds):
        raise ScenarioError(f"agent {index} needs a non-empty grid of non-negative speeds")
    if "start" in raw:
        start_s, offset = path.project(*raw["start"])
        if abs(offset) > 1e-6:
            raise ScenarioError(f"agent {index} does not start on its path")
    else:
        start_s = float(raw.get("start_s", 0.0))
    return AgentSpec(raw.get("role", f"agent{index}"), path, float(start_s), speeds, bool(raw.get("ego", True)))


def parse_scenario(data: dict, source: str = "") -> ScenarioSpec:
    sid = data.get("id")
    if sid not in SCENARIO_IDS:
        raise ScenarioError(f"scenario id must be one of {', '.join(SCENARIO_IDS)}, got {sid!r}")
    agents = tuple(_agent(raw, i) for i, raw in enumerate(data.get("agents", [])))
    if len(agents) != AGENT_COUNTS[sid]:
        raise ScenarioError(f"{sid} is a {AGENT_COUNTS[sid]}-agent game, got {len(agents)} agents")
    roles = [a.role for a in agents]
    missing = [r for r in SCENARIO_ROLES[sid] if r not in roles]
    if missing or len(set(roles)) != len(roles):
        raise ScenarioError(f"{sid} agents need distinct roles including {', '.join(SCENARIO_ROLES[sid])}")

    polygon = _array(data.get("polygon"), "polygon")
    goal = _array(data.get("goal"), "goal")
    merge = data.get("merge_point")
    if sid == "IC" and (polygon is None or goal is None):
        raise ScenarioError("IC needs the intersection polygon and the exit goal region")
    if sid == "MBI" and goal is None:
        raise ScenarioError("MBI needs the turn-lane goal region")
    if sid == "PP" and merge is None:
        raise ScenarioError("PP needs a merge point")

    background = data.get("background", {})
    try:
        kind = AutomatonKind(background.get("kind", AutomatonKind.NAC))
        switches = tuple((int(stage), AutomatonKind(k).value) for stage, k in background.get("switch", []))
    except ValueError as exc:
        raise ScenarioError(f"bad background automaton: {exc}") from None

    grid = data.get("type_grid")
    if grid is not None:
        grid = tuple(sorted({float(g) for g in grid}))
        if not grid or any(not -1 <= g <= 1 for g in grid):
            raise ScenarioError("type grid must be a non-empty subset of [-1, 1]")

    band = data.get("target_band")
    if band is not None and band not in TARGET_BANDS:
        raise ScenarioError(f"target_band must be one of {', '.join(TARGET_BANDS)}")

    return ScenarioSpec(
        id=sid,
        agents=agents,
        description=data.get("description", ""),
        polygon=polygon,
        goal=goal,
        merge_point=tuple(float(v) for v in merge) if merge is not None else None,
        background=kind,
        switches=switches,
        n_samples=data.get("n_samples"),
        target_band=band,
        type_grid=grid,
        models=tuple(data.get("models", ())),
        source=source,
    )


def scenario_dir() -> FilePath:
    return FilePath(getattr(settings, "HARNESS_SCENARIO_DIR", FilePath(__file__).resolve().parent / "scenarios"))


def load_scenario(name_or_path) -> ScenarioSpec:
    """A scenario file path, or a bundled scenario id (``ic``, ``mbi``, ``pp``)."""
    path = FilePath(name_or_path)
    if not path.exists():
        bundled = scenario_dir() / f"{str(name_or_path).lower()}.json"
        if not bundled.exists():
            raise ScenarioError(f"no scenario file {name_or_path}")
        path = bundled
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path.name}: {exc}") from None
    return parse_scenario(data, source=path.name)
