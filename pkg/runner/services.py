# runner/services.py
"""What the management commands compute and print; the commands only parse options."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from gamecore.config import GameConfig
from gamecore.tree import GameTree
from harness.policies import Model, parse_model, qlk_lambda
from robust.planner import robust_set
from strategic.equilibria import mspe_set, solve_equilibrium, sspe_set
from strategic.levelk import level1_set
from strategic.qlk import qlk_response
from strategic.solutions import SolutionSet

from .constants import SOLVABLE_MODELS
from .exceptions import ConfigError


def parse_floats(text: str, name: str, count: int | None = None) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"{name} needs {count} values, got {len(values)}")
    return values


def solve_model(model, tree: GameTree, types: Sequence[float], cfg: GameConfig, lam: float | None = None) -> SolutionSet:
    model = parse_model(model)
    if model.value not in SOLVABLE_MODELS:
        raise ConfigError(f"solve supports {', '.join(SOLVABLE_MODELS)}; {model.value} is a closed-loop baseline")
    if model == Model.SPNE:
        return solve_equilibrium(tree, types, cfg).to_solution_set()
    if model == Model.SSPE:
        return sspe_set(tree, types, cfg)
    if model == Model.MSPE:
        return mspe_set(tree, types, cfg)
    if model == Model.LEVEL1:
        return level1_set(tree, types, cfg)
    if model == Model.QLK:
        return qlk_response(tree, qlk_lambda() if lam is None else lam, types, cfg)
    return robust_set(tree, types, cfg)


def _entry(solution: SolutionSet, node, agent: int) -> str:
    def name(i):
        return f"{i}{node.maneuver_of(agent, i).value[0]}"

    if solution.probabilistic:
        probs = solution.probabilities(node.history_id, agent)
        return " ".join(f"{name(i)}={p:.4f}" for i, p in sorted(probs.items()))
    ids = solution.admissible(node.history_id, agent)
    return " ".join(name(i) for i in ids) if ids else "-"


def solution_table(solution: SolutionSet, tree: GameTree) -> list[str]:
    """
    One line per decision history: admissible action ids per agent, each
    suffixed with w/p for its maneuver (QLk lines carry probabilities).
    """
    width = max((len(h) for h in solution.histories()), default=1)
    header = f"{'history':<{width}}  " + "  ".join(f"agent {i}" for i in range(tree.n_agents))
    lines = [header]
    for h in solution.histories():
        node = tree.node(h)
        entries = [_entry(solution, node, i) for i in range(tree.n_agents)]
        flag = "  *" if h in solution.flagged else ""
        lines.append(f"{h:<{width}}  " + "  |  ".join(entries) + flag)
    return lines


def write_json(data: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def metrics_lines(table) -> list[str]:
    lines = [f"{'model':<8} {'scenario':<8} {'mean_success':>12} {'sd_across_types':>15} {'crash_rate':>10}"]
    for row in table.itertuples(index=False):
        lines.append(f"{row.model:<8} {row.scenario:<8} {row.mean_success:>12.6f} "
                     f"{row.sd_across_types:>15.6f} {row.crash_rate:>10.6f}")
    return lines


def stability_lines(report: list[dict]) -> list[str]:
    return [
        f"{r['scenario']}: {r['reference']} vs {r['model']}: mean {r['mean_gap']:+.6f} sd {r['sd_gap']:+.6f}"
        + ("  DEVIATION" if r["deviation"] else "")
        for r in report
    ]


def match_lines(reports) -> list[str]:
    """Match-rate table, one row per model."""
    lines = [f"{'model':<8} {'label':<14} {'games':>5} {'matched':>7} {'rate':>8} {'mean_gamma':>10} {'unplayable':>10}"]
    for report in reports:
        gamma = "-" if report.mean_gamma is None else f"{report.mean_gamma:.3f}"
        lines.append(f"{report.model:<8} {Model(report.model).label:<14} {len(report.results):>5} "
                     f"{sum(r.matched for r in report.results):>7} {report.rate:>8.5f} {gamma:>10} {report.unplayable:>10}")
    return lines


def oracle_lines(reports) -> list[str]:
    lines = [f"{'concept':<8} {'instances':>9} {'passed':>6} {'skipped':>7} {'failed':>6}  status"]
    for report in reports:
        row = report.to_dict()
        lines.append(f"{row['concept']:<8} {row['instances']:>9} {row['passed']:>6} {row['skipped']:>7} "
                     f"{row['failed']:>6}  {row['status']}")
    return lines
