from django.core.management.base import CommandError

from oracle.constants import ORACLE_INSTANCES
from oracle.services import CONCEPTS, run_checks

from ...constants import EXIT_SOLVER
from ...services import oracle_lines
from ..base import RunnerCommand


class Command(RunnerCommand):
    help = "Differential check of every solver against the brute-force reference on seeded small games."

    def add_command_arguments(self, parser):
        parser.add_argument("--concepts", help=f"comma-separated subset of {','.join(CONCEPTS)}")
        parser.add_argument("--instances", type=int, default=ORACLE_INSTANCES)
        parser.add_argument("--stages", type=int, default=2)

    def run(self, options):
        run = self.run_config(options)
        concepts = tuple(c.strip() for c in options["concepts"].split(",")) if options["concepts"] else CONCEPTS
        overrides = {k: v for k, v in run.game_overrides.items() if k not in ("horizon", "period", "n_samples")}
        reports = run_checks(
            concepts,
            instances=options["instances"],
            stages=options["stages"],
            n_samples=run.game_overrides.get("n_samples", 1),
            start_seed=run.seed,
            **overrides,
        )
        for line in oracle_lines(reports):
            self.stdout.write(line)
        failed = [r.concept for r in reports if not r.ok]
        if failed:
            raise CommandError(f"oracle mismatch for {', '.join(failed)}", returncode=EXIT_SOLVER)
