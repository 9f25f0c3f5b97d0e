# gamecore/config.py
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from django.conf import settings

from kinematics import constants as kin
from kinematics.primitives import KinematicLimits

from . import constants
from .exceptions import InvalidConfig


@dataclass(frozen=True)
class GameConfig:
    horizon: float = constants.HORIZON_S
    period: float = constants.PERIOD_S
    discount: float = constants.DISCOUNT
    alpha: float = constants.SIGMOID_ALPHA
    d0: float = constants.SIGMOID_D0
    progress_cap: float | None = None          # L_max; None → v_max · Δt_p
    continuation_stages: int | None = None     # K_c; None → K
    type_grid: tuple = constants.TYPE_GRID
    n_samples: int = kin.N_SAMPLES
    dt: float = kin.DT_S
    target_band: str = kin.TARGET_BAND
    limits: KinematicLimits = field(default_factory=KinematicLimits)

    # behaviour switches
    ac_condition_direction: str = "le"
    l1_expectation: bool = False
    mspe_lhs_safety: bool = False
    sspe_step_level: bool = False
    aggregate_per_step: bool = True
    equilibrium_fallback: bool = True
    robust_slack: int = 0

    def __post_init__(self):
        if self.period <= 0 or self.horizon <= 0:
            raise InvalidConfig("horizon and period must be positive")
        stages = round(self.horizon / self.period)
        if stages < 1 or abs(stages * self.period - self.horizon) > 1e-9:
            raise InvalidConfig(f"horizon {self.horizon}s is not a multiple of period {self.period}s")
        if not 0 < self.discount <= 1:
            raise InvalidConfig("discount must lie in (0, 1]")
        if self.alpha <= 0:
            raise InvalidConfig("sigmoid alpha must be positive")
        if self.n_samples < 1:
            raise InvalidConfig("n_samples must be at least 1")
        if self.target_band not in kin.TARGET_BANDS:
            raise InvalidConfig(f"target_band must be one of {kin.TARGET_BANDS}")
        if self.ac_condition_direction not in constants.AC_DIRECTIONS:
            raise InvalidConfig(f"ac_condition_direction must be one of {constants.AC_DIRECTIONS}")
        if self.robust_slack < 0:
            raise InvalidConfig("robust_slack must be non-negative")

        grid = tuple(sorted({float(g) for g in self.type_grid}))
        if not grid or any(g < -1 or g > 1 for g in grid):
            raise InvalidConfig("type grid must be a non-empty subset of [-1, 1]")
        object.__setattr__(self, "type_grid", grid)

        if self.progress_cap is None:
            object.__setattr__(self, "progress_cap", self.limits.v_max * self.period)
        if self.progress_cap <= 0:
            raise InvalidConfig("progress cap must be positive")
        if self.continuation_stages is None:
            object.__setattr__(self, "continuation_stages", stages)
        if self.continuation_stages < 0:
            raise InvalidConfig("continuation stages must be non-negative")

    @property
    def stages(self) -> int:
        return round(self.horizon / self.period)

    @property
    def cont_stages(self) -> int:
        return int(self.continuation_stages)

    @cached_property
    def _powers(self) -> np.ndarray:
        return self.discount ** np.arange(0, self.stages + self.cont_stages + 1)

    def discount_sum(self, first: int, last: int) -> float:
        """Σ δ^k for k = first..last (0 when the range is empty)."""
        if last < first:
            return 0.0
        return float(self._powers[first:last + 1].sum())

    def total_weight(self, remaining: int) -> float:
        return self.discount_sum(1, remaining + self.cont_stages)

    def with_overrides(self, **overrides) -> "GameConfig":
        return dataclasses.replace(self, **overrides)

    @classmethod
    def from_settings(cls, **overrides) -> "GameConfig":
        cont = str(getattr(settings, "GAME_CONTINUATION_STAGES", "") or "").strip()
        values = {
            "horizon": getattr(settings, "GAME_HORIZON_S", constants.HORIZON_S),
            "period": getattr(settings, "GAME_PERIOD_S", constants.PERIOD_S),
            "discount": getattr(settings, "GAME_DISCOUNT", constants.DISCOUNT),
            "alpha": getattr(settings, "GAME_SIGMOID_ALPHA", constants.SIGMOID_ALPHA),
            "d0": getattr(settings, "GAME_SIGMOID_D0", constants.SIGMOID_D0),
            "continuation_stages": int(cont) if cont else None,
            "type_grid": tuple(getattr(settings, "GAME_TYPE_GRID", constants.TYPE_GRID)),
            "n_samples": getattr(settings, "KINEMATICS_N_SAMPLES", kin.N_SAMPLES),
            "dt": getattr(settings, "KINEMATICS_DT_S", kin.DT_S),
            "target_band": getattr(settings, "KINEMATICS_TARGET_BAND", kin.TARGET_BAND),
            "limits": KinematicLimits.from_settings(),
        }
        values.update(overrides)
        try:
            return cls(**values)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig(str(exc)) from exc

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["type_grid"] = list(self.type_grid)
        return out
