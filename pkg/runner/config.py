# runner/config.py
"""
Run configuration, layered in increasing priority: Django settings, a JSON
config file, command-line flags.

Config file layout::

    {
      "schema_version": 1,
      "game": {"horizon": 4.0, "n_samples": 1, "type_grid": [-1, 0, 1]},
      "models": ["sspe", "robust"],
      "seed": 0,
      "jobs": 4,
      "out_dir": "out/mbi",
      "witness": "min",
      "first_stage": false,
      "qlk_lambda": 1.0
    }
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from gamecore.config import GameConfig
from gamecore.exceptions import InvalidConfig
from harness.constants import WITNESS_MODES
from harness.matching import MatchOptions
from harness.policies import parse_model

from .constants import CONFIG_SCHEMA_VERSION
from .exceptions import ConfigError

GAME_KEYS = frozenset(f.name for f in dataclasses.fields(GameConfig)) - {"limits"}
RUN_KEYS = frozenset({"models", "seed", "jobs", "out_dir", "witness", "first_stage", "qlk_lambda"})


@dataclass(frozen=True)
class RunConfig:
    game: GameConfig
    models: tuple[str, ...] = ()
    seed: int = 0
    jobs: int | None = None
    out_dir: Path = Path("out")
    witness: str = "min"
    first_stage: bool = False
    qlk_lambda: float | None = None
    # game fields set by the config file or a flag; these win over scenario files
    game_overrides: dict = field(default_factory=dict)

    def match_options(self) -> MatchOptions:
        return MatchOptions(witness=self.witness, first_stage=self.first_stage, lam=self.qlk_lambda)

    def scenario(self, spec):
        """``spec`` with its sampling density, type grid and target band dropped where the run sets them."""
        replace = {k: None for k in ("n_samples", "type_grid", "target_band") if k in self.game_overrides}
        return dataclasses.replace(spec, **replace) if replace else spec

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "game": {k: v for k, v in self.game.to_dict().items() if k != "limits"},
            "models": list(self.models),
            "seed": self.seed,
            "jobs": self.jobs,
            "out_dir": str(self.out_dir),
            "witness": self.witness,
            "first_stage": self.first_stage,
            "qlk_lambda": self.qlk_lambda,
        }


def parse_grid(text) -> tuple[float, ...]:
    """``"-1,0,1"`` or a list of numbers."""
    items = text.split(",") if isinstance(text, str) else list(text)
    try:
        grid = tuple(float(g) for g in items if str(g).strip() != "")
    except ValueError:
        raise ConfigError(f"type grid must be comma-separated numbers, got {text!r}") from None
    if not grid:
        raise ConfigError("type grid is empty")
    return grid


def parse_models(value) -> tuple[str, ...]:
    names = value.split(",") if isinstance(value, str) else list(value)
    try:
        return tuple(parse_model(n).value for n in names if str(n).strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path.name} must hold a JSON object")

    version = data.pop("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"{path.name}: config schema {version} is not supported (expected {CONFIG_SCHEMA_VERSION})")
    unknown = set(data) - RUN_KEYS - {"game"}
    if unknown:
        raise ConfigError(f"{path.name}: unknown keys {sorted(unknown)}")
    game = data.get("game", {})
    if not isinstance(game, dict) or set(game) - GAME_KEYS:
        raise ConfigError(f"{path.name}: unknown game settings {sorted(set(game) - GAME_KEYS)}")
    return data


def load_run_config(path=None, game: dict | None = None, **flags) -> RunConfig:
    """Settings, then ``path``, then every flag that is not None."""
    data = read_config_file(path) if path else {}

    overrides = dict(data.get("game", {}))
    overrides.update({k: v for k, v in (game or {}).items() if v is not None})
    if "type_grid" in overrides:
        overrides["type_grid"] = parse_grid(overrides["type_grid"])
    try:
        game_cfg = GameConfig.from_settings(**overrides)
    except InvalidConfig as exc:
        raise ConfigError(str(exc)) from exc

    values = {k: data[k] for k in RUN_KEYS if k in data}
    values.update({k: v for k, v in flags.items() if v is not None})
    unknown = set(values) - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run options {sorted(unknown)}")

    witness = values.get("witness", "min")
    if witness not in WITNESS_MODES:
        raise ConfigError(f"witness must be one of {', '.join(WITNESS_MODES)}")
    jobs = values.get("jobs")
    if jobs is not None and int(jobs) < 1:
        raise ConfigError("jobs must be at least 1")

    return RunConfig(
        game=game_cfg,
        models=parse_models(values.get("models", ())),
        seed=int(values.get("seed", 0)),
        jobs=None if jobs is None else int(jobs),
        out_dir=Path(values.get("out_dir") or getattr(settings, "HARNESS_OUTPUT_DIR", "out")),
        witness=witness,
        first_stage=bool(values.get("first_stage", False)),
        qlk_lambda=None if values.get("qlk_lambda") is None else float(values["qlk_lambda"]),
        game_overrides=overrides,
    )
