from harness.metrics import stability_report
from harness.scenarios import load_scenario
from harness.services import record_sweep
from harness.sweep import sweep

from ...services import metrics_lines, stability_lines
from ..base import RunnerCommand


class Command(RunnerCommand):
    help = "Closed-loop sweep of a scenario over its speed grid and every type combination."

    def add_command_arguments(self, parser):
        parser.add_argument("--scenario", required=True, help="scenario file or bundled id (ic, mbi, pp)")
        parser.add_argument("--models", help="comma-separated models; defaults to the scenario's list")
        parser.add_argument("--jobs", type=int, help="worker processes; defaults to the logical cores")
        parser.add_argument("--out", dest="out_dir", help="output directory")
        parser.add_argument("--stem", help="output file prefix; defaults to the scenario id")
        parser.add_argument("--persist", action="store_true", help="store the sweep in the database")

    def run(self, options):
        run = self.run_config(options, models=options["models"], jobs=options["jobs"], out_dir=options["out_dir"])
        spec = run.scenario(load_scenario(options["scenario"]))
        result = sweep(spec, run.game, models=run.models or None, seed=run.seed, jobs=run.jobs, lam=run.qlk_lambda)
        metrics_path, runs_path = result.write(run.out_dir, options["stem"])

        for line in metrics_lines(result.table):
            self.stdout.write(line)
        for line in stability_lines(stability_report(result.table)):
            self.stdout.write(line)
        self.stdout.write(f"wrote {metrics_path}")
        self.stdout.write(f"wrote {runs_path}")

        if options["persist"]:
            stored = record_sweep(result, run.game, run.seed)
            self.stdout.write(self.style.SUCCESS(f"stored {stored}"))
