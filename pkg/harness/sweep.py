# harness/sweep.py
from __future__ import annotations

import itertools
import logging
import multiprocessing as mp
import os
from dataclasses import dataclass

import django
import pandas as pd
from django.conf import settings

from gamecore.config import GameConfig
from gamecore.exceptions import InvalidConfig, Stuck
from strategic.equilibria import solve_equilibrium

from .constants import MAX_RUNS
from .metrics import metrics_table, write_metrics, write_outcomes
from .policies import EQUILIBRIUM_MODELS, STUDIED_MODELS, Model
from .scenarios import ScenarioSpec
from .simulation import OutcomeRecord, run_scenario, scenario_config, scenario_tree

logger = logging.getLogger(__name__)


def type_combinations(grid, n_agents: int) -> list[tuple[float, ...]]:
    return list(itertools.product(sorted(float(g) for g in grid), repeat=n_agents))


def default_jobs() -> int:
    jobs = getattr(settings, "HARNESS_JOBS", 0)
    return jobs if jobs > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepTask:
    """Every model and type combination at one initial-speed point; one game tree."""

    spec: ScenarioSpec
    init_index: int
    speeds: tuple[float, ...]
    combos: tuple[tuple[float, ...], ...]
    models: tuple[str, ...]
    cfg: GameConfig
    seed: int = 0
    lam: float | None = None

    def cell(self, combo_index: int) -> int:
        return self.init_index * len(self.combos) + combo_index


def run_cell(task: SweepTask) -> list[OutcomeRecord]:
    try:
        tree = scenario_tree(task.spec, task.speeds, task.cfg)
    except Stuck as exc:
        logger.warning("%s speeds %s: %s", task.spec.id, task.speeds, exc)
        return [
            OutcomeRecord(task.spec.id, m, task.cell(ci), task.speeds, types, stuck=True)
            for ci, types in enumerate(task.combos) for m in task.models
        ]

    out, solutions = [], {}
    for ci, types in enumerate(task.combos):
        for model in task.models:
            solution = None
            if Model(model) in EQUILIBRIUM_MODELS:
                if types not in solutions:
                    solutions[types] = solve_equilibrium(tree, types, task.cfg)
                solution = solutions[types]
            out.append(run_scenario(task.spec, task.speeds, types, model, seed=task.seed, cell=task.cell(ci),
                                    tree=tree, lam=task.lam, solution=solution))
        logger.debug("%s cell %d done", task.spec.id, task.cell(ci))
    return out


def _init_worker():
    django.setup()


@dataclass
class SweepResult:
    spec: ScenarioSpec
    models: tuple[str, ...]
    outcomes: list[OutcomeRecord]
    table: pd.DataFrame

    def write(self, directory, stem: str | None = None) -> tuple:
        stem = stem or self.spec.id.lower()
        return (
            write_metrics(self.table, os.path.join(directory, f"{stem}_metrics.csv")),
            write_outcomes(self.outcomes, os.path.join(directory, f"{stem}_runs.jsonl")),
        )


def build_tasks(spec: ScenarioSpec, cfg: GameConfig, models, seed: int = 0, lam: float | None = None,
                max_runs: int = MAX_RUNS) -> list[SweepTask]:
    combos = tuple(type_combinations(cfg.type_grid, spec.n_agents))
    grid = spec.initial_grid()
    total = len(grid) * len(combos) * len(models)
    if total > max_runs:
        raise InvalidConfig(f"sweep of {total} runs exceeds the limit of {max_runs}")
    return [
        SweepTask(spec, i, tuple(float(v) for v in speeds), combos, tuple(models), cfg, seed, lam)
        for i, speeds in enumerate(grid)
    ]


def sweep(spec: ScenarioSpec, cfg: GameConfig | None = None, models=None, seed: int = 0,
          jobs: int | None = None, lam: float | None = None) -> SweepResult:
    """
    Closed-loop runs over the initial-speed grid and every type combination.
    Results are ordered by model, then cell, whatever the number of workers.
    """
    cfg = scenario_config(spec, cfg)
    models = tuple(Model(m).value for m in (models or spec.models or STUDIED_MODELS))
    tasks = build_tasks(spec, cfg, models, seed, lam)
    jobs = default_jobs() if jobs is None else max(int(jobs), 1)
    logger.info("%s sweep: %d models, %d initial points, %d type combinations, %d workers",
                spec.id, len(models), len(tasks), len(tasks[0].combos) if tasks else 0, jobs)

    if jobs == 1 or len(tasks) == 1:
        chunks = [run_cell(task) for task in tasks]
    else:
        with mp.Pool(min(jobs, len(tasks)), initializer=_init_worker) as pool:
            chunks = pool.map(run_cell, tasks)

    rank = {m: i for i, m in enumerate(models)}
    outcomes = sorted(itertools.chain.from_iterable(chunks), key=lambda o: (rank[o.model], o.cell))
    table = metrics_table(outcomes, models)
    for row in table.itertuples(index=False):
        logger.info("%s %s: mean %.3f sd %.3f crash %.3f", row.scenario, row.model,
                    row.mean_success, row.sd_across_types, row.crash_rate)
    return SweepResult(spec, models, outcomes, table)
