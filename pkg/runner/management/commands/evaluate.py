from pathlib import Path

from harness.ingest import ingest_trajectories
from harness.matching import evaluate_records

from ...config import parse_models
from ...exceptions import ConfigError
from ...services import match_lines, write_json
from ..base import RunnerCommand


class Command(RunnerCommand):
    help = "Match rate of observed games against one or more behavior models."

    def add_command_arguments(self, parser):
        parser.add_argument("csv", help="trajectory CSV")
        parser.add_argument("manifest", help="game manifest JSON")
        parser.add_argument("--model", required=True, help="model, or a comma-separated list of models")
        parser.add_argument("--witness", help="min (default) or all")
        parser.add_argument("--first-stage", action="store_const", const=True,
                            help="match the first stage only")
        parser.add_argument("--json", dest="json_path", help="write the full report here")

    def run(self, options):
        run = self.run_config(options, witness=options["witness"], first_stage=options["first_stage"])
        for name in ("csv", "manifest"):
            if not Path(options[name]).is_file():
                raise ConfigError(f"{name} file {options[name]} does not exist")
        models = parse_models(options["model"])
        if not models:
            raise ConfigError("no model given")

        records = ingest_trajectories(options["csv"], options["manifest"], horizon=run.game.horizon, dt=run.game.dt)
        reports = [evaluate_records(records, model, run.game, run.match_options()) for model in models]

        for line in match_lines(reports):
            self.stdout.write(line)
        if options["json_path"]:
            path = write_json({"reports": [r.to_dict() for r in reports]}, options["json_path"])
            self.stdout.write(f"wrote {path}")
