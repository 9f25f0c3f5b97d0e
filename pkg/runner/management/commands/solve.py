from harness.scenarios import load_scenario
from harness.simulation import scenario_config, scenario_tree

from ...services import parse_floats, solution_table, solve_model, write_json
from ..base import RunnerCommand


class Command(RunnerCommand):
    help = "Solve one scenario game for a model and type assignment; writes the per-history solution as JSON."

    def add_command_arguments(self, parser):
        parser.add_argument("--scenario", required=True, help="scenario file or bundled id (ic, mbi, pp)")
        parser.add_argument("--model", required=True)
        parser.add_argument("--types", required=True, help="one type per agent, e.g. 0,0.5")
        parser.add_argument("--speeds", help="initial speed per agent; defaults to the first grid point")
        parser.add_argument("--out", dest="out_dir", help="output directory")

    def run(self, options):
        run = self.run_config(options, out_dir=options["out_dir"])
        spec = run.scenario(load_scenario(options["scenario"]))
        types = parse_floats(options["types"], "types", spec.n_agents)
        speeds = (
            parse_floats(options["speeds"], "speeds", spec.n_agents)
            if options["speeds"] else spec.initial_grid()[0]
        )
        cfg = scenario_config(spec, run.game)
        tree = scenario_tree(spec, speeds, cfg)
        solution = solve_model(options["model"], tree, types, cfg, run.qlk_lambda)

        path = write_json({
            "scenario": spec.id,
            "speeds": [float(v) for v in speeds],
            "config": run.to_dict(),
            **solution.to_json(),
        }, run.out_dir / f"{spec.id.lower()}_{solution.concept.value}_solution.json")

        self.stdout.write(f"{solution.concept.label} for {spec.id}, speeds {list(speeds)}, types {list(types)}")
        for line in solution_table(solution, tree):
            self.stdout.write(line)
        if solution.flagged:
            self.stdout.write(f"* {len(solution.flagged)} histories flagged")
        self.stdout.write(f"wrote {path}")
