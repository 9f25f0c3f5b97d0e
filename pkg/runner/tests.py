import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from harness.exceptions import SchemaError
from harness.models import SweepRun
from harness.scenarios import load_scenario
from strategic.exceptions import NoPureEquilibrium

from .config import load_run_config, parse_grid
from .constants import CONFIG_SCHEMA_VERSION
from .exceptions import ConfigError
from .management.base import RunnerCommand

FIXTURES = Path(__file__).resolve().parent.parent / "harness" / "fixtures"
TRAJECTORIES = str(FIXTURES / "trajectories.csv")
MANIFEST = str(FIXTURES / "manifest.json")

SMALL = {"horizon": 4.0, "n_samples": 1}


class Raising(RunnerCommand):
    def __init__(self, exc):
        super().__init__()
        self.exc = exc

    def run(self, options):
        raise self.exc


class CommandTestMixin:
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def call(self, name, *args, **options):
        out = StringIO()
        call_command(name, *args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def assertExitCode(self, code, name, *args, **options):
        with self.assertRaises(CommandError) as cm:
            self.call(name, *args, **options)
        self.assertEqual(cm.exception.returncode, code)
        return str(cm.exception)


class RunConfigTests(CommandTestMixin, SimpleTestCase):
    def write(self, data):
        path = self.tmp / "run.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    def test_flags_override_file_override_settings(self):
        path = self.write({"game": {"horizon": 4.0, "n_samples": 1}, "models": ["ac"], "seed": 3})
        run = load_run_config(path, game={"n_samples": 2, "discount": None})
        self.assertEqual(run.game.horizon, 4.0)
        self.assertEqual(run.game.n_samples, 2)
        self.assertEqual(run.models, ("ac",))
        self.assertEqual(run.seed, 3)
        self.assertEqual(load_run_config(path, seed=5).seed, 5)

    def test_defaults_come_from_settings(self):
        run = load_run_config()
        self.assertEqual(run.game.horizon, 6.0)
        self.assertEqual(run.witness, "min")
        self.assertEqual(run.game_overrides, {})

    def test_overridden_sampling_wins_over_scenario(self):
        spec = load_scenario("pp")
        self.assertEqual(load_run_config().scenario(spec).n_samples, 2)
        run = load_run_config(game={"n_samples": 1, "type_grid": "-1,1"})
        self.assertIsNone(run.scenario(spec).n_samples)
        self.assertEqual(run.game.type_grid, (-1.0, 1.0))
        banded = load_run_config(game={"target_band": "lattice"})
        self.assertIsNone(banded.scenario(spec).target_band)
        self.assertEqual(banded.game.target_band, "lattice")

    def test_rejects_bad_configs(self):
        for data in (
            {"schema_version": CONFIG_SCHEMA_VERSION + 1},
            {"colour": "red"},
            {"game": {"horizon": 5.0}},
            {"game": {"warp": 9}},
            {"game": {"target_band": "wide"}},
            {"models": ["level2"]},
            {"witness": "median"},
            {"jobs": 0},
        ):
            with self.subTest(data=data), self.assertRaises(ConfigError):
                load_run_config(self.write(data))
        with self.assertRaises(ConfigError):
            load_run_config(self.tmp / "missing.json")

    def test_parse_grid(self):
        self.assertEqual(parse_grid("-1, 0,1"), (-1.0, 0.0, 1.0))
        with self.assertRaises(ConfigError):
            parse_grid("a,b")
        with self.assertRaises(ConfigError):
            parse_grid("")

    def test_version_names_config_schema(self):
        self.assertIn(str(CONFIG_SCHEMA_VERSION), RunnerCommand().get_version())

    def test_domain_errors_map_to_exit_codes(self):
        for exc, code in (
            (SchemaError("bad header"), 4),
            (NoPureEquilibrium("no pure cell"), 3),
            (ConfigError("bad flag"), 2),
            (FileNotFoundError("gone"), 2),
        ):
            with self.subTest(exc=exc), self.assertRaises(CommandError) as cm:
                call_command(Raising(exc), stdout=StringIO())
            self.assertEqual(cm.exception.returncode, code)


class SolveCommandTests(CommandTestMixin, SimpleTestCase):
    def test_solution_json_and_table(self):
        out = self.call("solve", scenario="pp", model="sspe", types="0,0", out_dir=str(self.tmp), **SMALL)
        data = json.loads((self.tmp / "pp_sspe_solution.json").read_text())
        self.assertEqual(data["concept"], "sspe")
        self.assertEqual(data["scenario"], "PP")
        self.assertIn("h", data["solution"])
        self.assertEqual(set(data["solution"]["h"]), {"0", "1"})
        self.assertTrue(out.splitlines()[1].startswith("history"))

    def test_repeated_solves_are_identical(self):
        first = self.call("solve", scenario="pp", model="qlk", types="0.5,-0.5", out_dir=str(self.tmp), **SMALL)
        a = (self.tmp / "pp_qlk_solution.json").read_bytes()
        again = self.call("solve", scenario="pp", model="qlk", types="0.5,-0.5", out_dir=str(self.tmp), **SMALL)
        self.assertEqual(first, again)
        self.assertEqual(a, (self.tmp / "pp_qlk_solution.json").read_bytes())

    def test_every_solvable_model(self):
        for model in ("spne", "mspe", "level1", "robust"):
            with self.subTest(model=model):
                self.call("solve", scenario="pp", model=model, types="0,1", speeds="0,6",
                          out_dir=str(self.tmp), **SMALL)
                self.assertTrue((self.tmp / f"pp_{model}_solution.json").exists())

    def test_unknown_model_names_the_choices(self):
        message = self.assertExitCode(2, "solve", scenario="pp", model="level2", types="0,0",
                                      out_dir=str(self.tmp), **SMALL)
        for name in ("level1", "sspe", "mspe", "qlk", "robust", "maxmax", "nac"):
            self.assertIn(name, message)

    def test_usage_errors(self):
        self.assertExitCode(2, "solve", scenario="pp", model="ac", types="0,0", out_dir=str(self.tmp), **SMALL)
        self.assertExitCode(2, "solve", scenario="pp", model="sspe", types="0", out_dir=str(self.tmp), **SMALL)
        self.assertExitCode(2, "solve", scenario="nowhere", model="sspe", types="0,0", out_dir=str(self.tmp))
        self.assertExitCode(2, "solve", scenario="pp", model="sspe", types="0,0", horizon=5.0, out_dir=str(self.tmp))


class SimulateCommandTests(CommandTestMixin, SimpleTestCase):
    def simulate(self, stem, **options):
        defaults = {"scenario": "pp", "models": "ac,sspe", "grid_types": "-1,1", "jobs": 1,
                    "out_dir": str(self.tmp), "stem": stem, **SMALL}
        defaults.update(options)
        return self.call("simulate", **defaults)

    def table(self, out):
        return [line for line in out.splitlines() if not line.startswith("wrote")]

    def runs(self, stem):
        lines = (self.tmp / f"{stem}_runs.jsonl").read_text().splitlines()
        return [json.loads(line) for line in lines]

    def test_metrics_and_runs_written(self):
        out = self.simulate("pp")
        metrics = (self.tmp / "pp_metrics.csv").read_text().splitlines()
        self.assertEqual(metrics[0], "model,scenario,mean_success,sd_across_types,crash_rate")
        self.assertEqual([line.split(",")[0] for line in metrics[1:]], ["ac", "sspe"])
        runs = self.runs("pp")
        self.assertEqual(len(runs), 24)
        for run in runs:
            if run["crash"]:
                self.assertFalse(run["success"])
        self.assertIn("wrote", out)

    def test_grid_flag_sets_type_combinations(self):
        self.simulate("grid", models="ac", grid_types="-1,0,1")
        runs = self.runs("grid")
        self.assertEqual(len(runs), 27)
        self.assertEqual(len({tuple(r["types"]) for r in runs}), 9)

    def test_reruns_are_byte_identical(self):
        first = self.simulate("a", models="qlk", seed=11)
        again = self.simulate("b", models="qlk", seed=11)
        self.assertEqual(self.table(first), self.table(again))
        for suffix in ("metrics.csv", "runs.jsonl"):
            self.assertEqual((self.tmp / f"a_{suffix}").read_bytes(), (self.tmp / f"b_{suffix}").read_bytes())

    def test_unknown_model(self):
        self.assertExitCode(2, "simulate", scenario="pp", models="ac,level9", out_dir=str(self.tmp), **SMALL)

    @tag("slow")
    def test_intersection_sweep_smoke(self):
        self.simulate("ic", scenario="ic", models="ac,nac", grid_types="-1,0,1")
        runs = self.runs("ic")
        self.assertEqual(len({tuple(r["types"]) for r in runs}), 27)
        metrics = (self.tmp / "ic_metrics.csv").read_text().splitlines()
        self.assertEqual(len(metrics), 3)


class PersistedSimulateTests(CommandTestMixin, TestCase):
    def test_persist_stores_sweep(self):
        out = self.call("simulate", scenario="pp", models="ac", grid_types="0", jobs=1, persist=True,
                        out_dir=str(self.tmp), **SMALL)
        run = SweepRun.objects.get()
        self.assertEqual(run.status, SweepRun.Status.DONE)
        self.assertEqual(run.outcomes.count(), 3)
        self.assertIn("stored", out)


class EvaluateCommandTests(CommandTestMixin, SimpleTestCase):
    def evaluate(self, model, **options):
        path = self.tmp / f"{model.replace(',', '-')}.json"
        out = self.call("evaluate", TRAJECTORIES, MANIFEST, model=model, json_path=str(path),
                        n_samples=1, **options)
        return out, json.loads(path.read_text())

    def test_printed_rate_matches_report(self):
        out, data = self.evaluate("sspe")
        row = out.splitlines()[1].split()
        self.assertEqual(row[0], "sspe")
        self.assertEqual(row[4], f"{data['reports'][0]['rate']:.5f}")
        self.assertEqual(row[-1], str(data['reports'][0]['unplayable']))

    def test_automata_rates_sum_to_one(self):
        _, data = self.evaluate("ac,nac")
        ac, nac = data["reports"]
        self.assertEqual(ac["unplayable"], nac["unplayable"])
        self.assertAlmostEqual(ac["rate"] + nac["rate"] + nac["unplayable"] / nac["games"], 1.0)

    def test_witness_and_first_stage_flags(self):
        _, data = self.evaluate("level1", witness="all", first_stage=True)
        report = data["reports"][0]
        self.assertTrue(report["first_stage"])
        self.assertEqual(report["witness"], "all")
        for result in report["results"]:
            self.assertEqual(len(result["observed"]), 1)
            self.assertIn("witnesses", result)

    def test_missing_manifest(self):
        self.assertExitCode(2, "evaluate", TRAJECTORIES, str(self.tmp / "none.json"), model="ac")

    def test_bad_trajectory_file_is_a_data_error(self):
        broken = self.tmp / "broken.csv"
        broken.write_text("track,t\n1,0\n", encoding="utf-8")
        self.assertExitCode(4, "evaluate", str(broken), MANIFEST, model="ac")


class OracleCheckCommandTests(CommandTestMixin, SimpleTestCase):
    def test_prints_a_row_per_concept(self):
        out = self.call("oracle_check", concepts="spne,sspe,AC", instances=3)
        lines = out.splitlines()
        self.assertEqual([line.split()[0] for line in lines[1:]], ["spne", "sspe", "AC"])
        self.assertTrue(all(line.endswith("PASS") for line in lines[1:]))

    def test_unknown_concept(self):
        self.assertExitCode(2, "oracle_check", concepts="spne,astrology", instances=1)
