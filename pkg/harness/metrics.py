# harness/metrics.py
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .constants import METRICS_COLUMNS
from .policies import EQUILIBRIUM_MODELS, Model

logger = logging.getLogger(__name__)

# models the equilibrium concepts are held against
STABLE_REFERENCES = (Model.ROBUST, Model.LEVEL1)


def population_sd(values) -> float:
    return float(np.std(np.asarray(values, dtype=float), ddof=0))


def outcome_frame(outcomes) -> pd.DataFrame:
    rows = [
        {
            "model": o.model,
            "scenario": o.scenario,
            "cell": o.cell,
            "types": ",".join(f"{g:g}" for g in o.types),
            "success": float(o.success),
            "crash": float(o.crash),
        }
        for o in outcomes
    ]
    return pd.DataFrame(rows, columns=["model", "scenario", "cell", "types", "success", "crash"])


def metrics_table(outcomes, models=None) -> pd.DataFrame:
    """
    One row per (model, scenario): mean success over every run, population SD
    of the per-type-combination mean success, and the crash rate.
    """
    frame = outcome_frame(outcomes)
    if frame.empty:
        return pd.DataFrame(columns=METRICS_COLUMNS)

    keys = ["model", "scenario"]
    per_combo = frame.groupby(keys + ["types"], sort=False)["success"].mean()
    sd = per_combo.groupby(level=keys, sort=False).agg(population_sd).rename("sd_across_types")
    table = frame.groupby(keys, sort=False).agg(mean_success=("success", "mean"), crash_rate=("crash", "mean"))
    table = table.join(sd).reset_index()

    order = [Model(m).value for m in models] if models else list(dict.fromkeys(frame["model"]))
    table["_order"] = table["model"].map({m: i for i, m in enumerate(order)})
    table = table.sort_values(["_order", "scenario"], kind="stable").drop(columns="_order")
    return table[METRICS_COLUMNS].reset_index(drop=True)


def write_metrics(table: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path


def write_outcomes(outcomes, path) -> Path:
    """Per-run JSONL log, one sorted-key object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(outcome.to_dict(), sort_keys=True) + "\n")
    return path


def stability_report(table: pd.DataFrame) -> list[dict]:
    """
    Every (equilibrium model, reference) pair per scenario. A pair is flagged
    when the reference does not reach the equilibrium model's mean success at
    an equal or lower SD across types.
    """
    report = []
    for scenario, rows in table.groupby("scenario", sort=True):
        by_model = rows.set_index("model")
        for reference in STABLE_REFERENCES:
            if reference.value not in by_model.index:
                continue
            ref = by_model.loc[reference.value]
            for model in EQUILIBRIUM_MODELS:
                if model.value not in by_model.index:
                    continue
                eq = by_model.loc[model.value]
                deviation = not (ref.mean_success >= eq.mean_success and ref.sd_across_types <= eq.sd_across_types)
                report.append({
                    "scenario": scenario,
                    "reference": reference.label,
                    "model": model.label,
                    "mean_gap": round(float(ref.mean_success - eq.mean_success), 6),
                    "sd_gap": round(float(ref.sd_across_types - eq.sd_across_types), 6),
                    "deviation": deviation,
                })
                if deviation:
                    logger.warning("%s: %s is not at least as stable as %s", scenario, reference.label, model.label)
    return report
