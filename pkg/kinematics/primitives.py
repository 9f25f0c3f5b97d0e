# kinematics/primitives.py
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from django.conf import settings
from django.db import models

from . import constants


class ManeuverClass(models.TextChoices):
    WAIT = "wait", "Wait"
    PROCEED = "proceed", "Proceed"


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state X = [x, y, vx, vy, ax, ay, theta] (body-frame velocity)."""

    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "vx", "vy", "ax", "ay", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"VehicleState.{name} must be finite")
        if abs(self.theta) > math.pi + 1e-12:
            raise ValueError("VehicleState.theta must lie in [-pi, pi]")

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        return {k: round(getattr(self, k), 6) for k in ("x", "y", "vx", "vy", "ax", "ay", "theta")}


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float = constants.V_MAX
    a_min: float = constants.A_MIN
    a_max: float = constants.A_MAX
    jerk_max: float = constants.JERK_MAX
    lat_v_max: float = constants.LAT_V_MAX
    speed_eps: float = constants.SPEED_EPS

    def __post_init__(self):
        if not self.a_min < 0 < self.a_max:
            raise ValueError("KinematicLimits need a_min < 0 < a_max")
        if self.v_max <= 0 or self.jerk_max <= 0:
            raise ValueError("KinematicLimits need v_max > 0 and jerk_max > 0")
        if self.lat_v_max <= 0 or self.speed_eps < 0:
            raise ValueError("KinematicLimits need lat_v_max > 0 and speed_eps >= 0")

    @classmethod
    def from_settings(cls, **overrides) -> "KinematicLimits":
        values = {
            "v_max": getattr(settings, "KINEMATICS_V_MAX", constants.V_MAX),
            "a_min": getattr(settings, "KINEMATICS_A_MIN", constants.A_MIN),
            "a_max": getattr(settings, "KINEMATICS_A_MAX", constants.A_MAX),
            "jerk_max": getattr(settings, "KINEMATICS_JERK_MAX", constants.JERK_MAX),
        }
        values.update(overrides)
        return cls(**values)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    A sampled trajectory action. Sample 0 is always the exact origin state;
    speed/accel arrays are longitudinal (path-tracking, no lateral slip).
    """

    origin: VehicleState
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    a: np.ndarray
    theta: np.ndarray
    maneuver: ManeuverClass
    dt: float = constants.DT_S
    target_speed: float | None = field(default=None)

    def __post_init__(self):
        for name in ("t", "x", "y", "v", "a", "theta"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.t)
        if n < 2 or any(len(getattr(self, k)) != n for k in ("x", "y", "v", "a", "theta")):
            raise ValueError("Trajectory arrays must share a length of at least 2")
        if self.t[0] != 0.0 or np.any(np.diff(self.t) <= 0):
            raise ValueError("Trajectory sample times must start at 0 and strictly increase")
        object.__setattr__(self, "maneuver", ManeuverClass(self.maneuver))

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @cached_property
    def positions(self) -> np.ndarray:
        pts = np.column_stack([self.x, self.y])
        pts.setflags(write=False)
        return pts

    def state_at(self, index: int) -> VehicleState:
        if index == 0:
            return self.origin
        return VehicleState(
            x=float(self.x[index]),
            y=float(self.y[index]),
            vx=float(self.v[index]),
            ax=float(self.a[index]),
            theta=float(self.theta[index]),
        )

    @property
    def start(self) -> VehicleState:
        return self.origin

    @cached_property
    def end(self) -> VehicleState:
        return self.state_at(self.n_samples - 1)

    @property
    def samples(self) -> list[tuple[float, VehicleState]]:
        return [(float(self.t[i]), self.state_at(i)) for i in range(self.n_samples)]

    @property
    def end_speed(self) -> float:
        return float(self.v[-1])

    @cached_property
    def length(self) -> float:
        steps = np.diff(self.positions, axis=0)
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())

    def describe(self) -> dict:
        return {
            "maneuver": self.maneuver.value,
            "duration": round(self.duration, 6),
            "end_speed": round(self.end_speed, 6),
            "length": round(self.length, 6),
        }
