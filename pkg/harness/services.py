# harness/services.py
import logging

from django.db import transaction

from .models import RunOutcome, SweepRun

logger = logging.getLogger(__name__)


@transaction.atomic
def record_sweep(result, cfg=None, seed: int = 0) -> SweepRun:
    """
    Store a finished sweep and every run outcome in one transaction.
    ``result`` is a harness.sweep.SweepResult.
    """
    run = SweepRun.objects.create(
        scenario=result.spec.id,
        source=result.spec.source,
        seed=seed,
        models_run=list(result.models),
        config=_config_snapshot(cfg),
    )
    RunOutcome.objects.bulk_create([
        RunOutcome(
            sweep=run,
            model=o.model,
            cell=o.cell,
            speeds=list(o.speeds),
            types=list(o.types),
            actions=[list(j) for j in o.joints],
            success=o.success,
            crash=o.crash,
            stuck=o.stuck,
            min_gap=o.min_gap if o.gaps else None,
        )
        for o in result.outcomes
    ])
    run.mark_done(result.table.to_dict(orient="records"))
    logger.info("stored %s sweep #%d with %d outcomes", run.scenario, run.pk, len(result.outcomes))
    return run


def _config_snapshot(cfg) -> dict:
    return cfg.to_dict() if cfg is not None else {}
