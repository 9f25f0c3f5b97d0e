import dataclasses
import itertools
import json
import math
import tempfile
from pathlib import Path as FilePath
from types import SimpleNamespace
from unittest import mock

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, TestCase, tag

from gamecore.exceptions import InvalidConfig, Stuck
from gamecore.testing import small_config
from kinematics.constants import TARGET_BANDS
from kinematics.exceptions import EmptyActionSet
from kinematics.paths import Path
from kinematics.primitives import ManeuverClass, VehicleState
from kinematics.services import generate_trajectories

from .exceptions import GapError, SchemaError, ScenarioError
from .ingest import classify_maneuver, export_records, ingest_trajectories
from .matching import MatchOptions, evaluate_records, match_rate
from .metrics import metrics_table, population_sd, stability_report, write_metrics
from .models import SweepRun
from .policies import Model, build_population, parse_model
from .scenarios import inside_polygon, load_scenario, parse_scenario
from .services import record_sweep
from .simulation import (
    OutcomeRecord,
    intersection_cleared,
    merged_ahead,
    play,
    run_scenario,
    scenario_config,
    scenario_tree,
)
from .sweep import build_tasks, sweep, type_combinations
from .synthesis import synthesize_records

FIXTURES = FilePath(__file__).resolve().parent / "fixtures"
TRAJECTORIES = FIXTURES / "trajectories.csv"
MANIFEST = FIXTURES / "manifest.json"

SQUARE = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])


def pp_spec(**overrides):
    return dataclasses.replace(load_scenario("pp"), n_samples=1, **overrides)


def pp_clear_road():
    """Parked-car scenario with the coming vehicle already past the merge point."""
    spec = pp_spec()
    parked, coming = spec.agents
    return dataclasses.replace(spec, agents=(parked, dataclasses.replace(coming, start_s=130.0)))


def side_by_side(gap):
    return parse_scenario({
        "id": "MBI",
        "agents": [
            {"role": "on_lane", "path": [[-100, 0], [100, 0]], "start_s": 60, "speeds": [8]},
            {"role": "merger", "path": [[-100, gap], [100, gap]], "start_s": 60, "speeds": [8]},
        ],
        "goal": [[-10, -1.75], [100, -1.75], [100, 1.75], [-10, 1.75]],
        "n_samples": 1,
    })


def outcome(model, cell, types, success, crash=False):
    return OutcomeRecord("MBI", model, cell, (6.0, 6.0), types, success=success, crash=crash)


class ScenarioTests(SimpleTestCase):
    def test_bundled_scenarios_load(self):
        for name, agents, cells in (("ic", 3, 9), ("mbi", 2, 9), ("pp", 2, 3)):
            spec = load_scenario(name)
            self.assertEqual(spec.n_agents, agents)
            self.assertEqual(len(spec.initial_grid()), cells)

    def test_left_turner_starts_on_its_approach(self):
        spec = load_scenario("ic")
        state = spec.initial_states((6.0, 9.0, 9.0))[spec.index("left_turner")]
        self.assertAlmostEqual(state.x, 1.75, places=6)
        self.assertAlmostEqual(state.y, -10.0, places=6)
        self.assertAlmostEqual(state.theta, math.pi / 2, places=6)
        self.assertAlmostEqual(state.speed, 6.0)

    def test_background_agents_follow_scripted_switch(self):
        spec = load_scenario("ic")
        self.assertEqual([a.ego for a in spec.agents], [True, False, False])
        self.assertEqual(spec.switches, ((2, "AC"),))

    def test_scenario_target_band_reaches_the_game_config(self):
        spec = load_scenario("pp")
        self.assertEqual(spec.target_band, "reachable")
        self.assertEqual(scenario_config(spec, small_config(target_band="lattice")).target_band, "reachable")
        unset = dataclasses.replace(spec, target_band=None)
        self.assertEqual(scenario_config(unset, small_config(target_band="lattice")).target_band, "lattice")

    def test_load_by_path(self):
        spec = load_scenario(FilePath(__file__).resolve().parent / "scenarios" / "mbi.json")
        self.assertEqual(spec.id, "MBI")
        self.assertEqual(spec.source, "mbi.json")

    def test_rejects_malformed_scenarios(self):
        base = {
            "id": "PP",
            "agents": [
                {"role": "parked", "path": [[0, 0], [10, 0]], "speeds": [0]},
                {"role": "coming", "path": [[0, 3], [10, 3]], "speeds": [6]},
            ],
            "merge_point": [5, 0],
        }
        self.assertEqual(parse_scenario(base).id, "PP")
        for broken in (
            {**base, "id": "XX"},
            {**base, "agents": base["agents"][:1]},
            {**base, "merge_point": None},
            {**base, "type_grid": [2.0]},
            {**base, "target_band": "wide"},
            {**base, "background": {"kind": "sometimes"}},
            {**base, "agents": [base["agents"][0], {**base["agents"][1], "speeds": [-1]}]},
            {**base, "agents": [base["agents"][0], {**base["agents"][1], "role": "parked"}]},
        ):
            with self.assertRaises(ScenarioError):
                parse_scenario(broken)
        with self.assertRaises(ScenarioError):
            load_scenario("no-such-scenario")

    def test_inside_polygon_counts_edges(self):
        self.assertTrue(inside_polygon((1.0, 1.0), SQUARE))
        self.assertTrue(inside_polygon((2.0, 1.0), SQUARE))
        self.assertFalse(inside_polygon((2.5, 1.0), SQUARE))
        self.assertFalse(inside_polygon((1.0, -0.1), SQUARE))


class SuccessPredicateTests(SimpleTestCase):
    def setUp(self):
        self.ic = load_scenario("ic")
        self.mbi = load_scenario("mbi")

    def finals(self, *states):
        return [SimpleNamespace(states=list(states))]

    def test_intersection_cleared(self):
        turner = VehicleState(x=-20.0, y=1.75, vx=6.0, theta=math.pi)
        near = VehicleState(x=-1.75, y=-30.0, vx=9.0, theta=-math.pi / 2)
        far = VehicleState(x=-5.25, y=-30.0, vx=9.0, theta=-math.pi / 2)
        self.assertTrue(intersection_cleared(self.ic, self.finals(turner, near, far)))

    def test_stopped_vehicle_in_box_blocks_success(self):
        turner = VehicleState(x=-20.0, y=1.75, vx=6.0, theta=math.pi)
        stopped = VehicleState(x=-1.75, y=0.0, vx=0.0, theta=-math.pi / 2)
        far = VehicleState(x=-5.25, y=-30.0, vx=9.0, theta=-math.pi / 2)
        self.assertFalse(intersection_cleared(self.ic, self.finals(turner, stopped, far)))

    def test_turner_still_in_box_fails(self):
        turner = VehicleState(x=0.0, y=0.0, vx=6.0, theta=math.pi / 2)
        near = VehicleState(x=-1.75, y=-30.0, vx=9.0, theta=-math.pi / 2)
        far = VehicleState(x=-5.25, y=-30.0, vx=9.0, theta=-math.pi / 2)
        self.assertFalse(intersection_cleared(self.ic, self.finals(turner, near, far)))

    def test_merger_must_end_ahead_in_goal_lane(self):
        lane_car = VehicleState(x=10.0, y=0.0, vx=8.0)
        ahead = VehicleState(x=20.0, y=0.0, vx=8.0)
        behind = VehicleState(x=5.0, y=0.0, vx=8.0)
        still_beside = VehicleState(x=20.0, y=3.5, vx=8.0)
        self.assertTrue(merged_ahead(self.mbi, self.finals(lane_car, ahead)))
        self.assertFalse(merged_ahead(self.mbi, self.finals(lane_car, behind)))
        self.assertFalse(merged_ahead(self.mbi, self.finals(lane_car, still_beside)))


class ClosedLoopTests(SimpleTestCase):
    def setUp(self):
        self.cfg = small_config(stages=2)

    def test_pull_out_behind_passed_vehicle_succeeds(self):
        spec = pp_clear_road()
        for model in ("ac", "nac", "sspe", "level1"):
            with self.subTest(model=model):
                record = run_scenario(spec, (0.0, 9.0), (0.0, 0.0), model, cfg=self.cfg)
                self.assertFalse(record.crash)
                self.assertTrue(record.success)
                self.assertEqual(len(record.joints), 2)

    def test_overlapping_vehicles_crash_at_first_stage(self):
        spec = side_by_side(0.05)
        record = run_scenario(spec, (8.0, 8.0), (0.0, 0.0), "ac", cfg=self.cfg)
        self.assertTrue(record.crash)
        self.assertFalse(record.success)
        self.assertEqual(len(record.joints), 1)
        self.assertAlmostEqual(record.min_gap, 0.05, places=6)

    def test_crash_is_gap_at_or_below_limit(self):
        spec = pp_spec()
        cfg = scenario_config(spec, self.cfg)
        tree = scenario_tree(spec, (0.0, 9.0), cfg)

        def run(limit):
            population = build_population(spec, tree, Model.AC, (0.0, 0.0), cfg)
            return play(tree, population, gap_limit=limit)

        _, joints, gaps, crash = run(0.0)
        self.assertFalse(crash)
        self.assertEqual(len(joints), cfg.stages)
        _, _, _, crash = run(min(gaps))
        self.assertTrue(crash)

    def test_next_stage_starts_where_the_last_ended(self):
        spec = pp_spec()
        cfg = scenario_config(spec, self.cfg)
        tree = scenario_tree(spec, (0.0, 9.0), cfg)
        population = build_population(spec, tree, Model.LEVEL1, (0.0, 0.5), cfg)
        visited, joints, _, _ = play(tree, population)
        for node, child, joint in zip(visited, visited[1:], joints):
            for i, a in enumerate(joint):
                end = node.action(i, a).end
                self.assertEqual(child.states[i].position, end.position)
                self.assertEqual(child.states[i].speed, end.speed)

    def test_runs_are_deterministic(self):
        spec = pp_spec()
        for model in ("qlk", "level1"):
            with self.subTest(model=model):
                first = run_scenario(spec, (0.0, 6.0), (0.5, -0.5), model, cfg=self.cfg, seed=3, cell=1)
                again = run_scenario(spec, (0.0, 6.0), (0.5, -0.5), model, cfg=self.cfg, seed=3, cell=1)
                self.assertEqual(first.to_dict(), again.to_dict())

    def test_parse_model_lists_choices(self):
        self.assertEqual(parse_model("robust"), Model.ROBUST)
        with self.assertRaisesMessage(ValueError, "maxmax"):
            parse_model("level2")


class MetricsTests(SimpleTestCase):
    def test_all_successful_runs(self):
        outcomes = [outcome("sspe", c, t, True) for c, t in enumerate([(0.0, 0.0), (1.0, 1.0)])]
        row = metrics_table(outcomes).iloc[0]
        self.assertEqual(row.mean_success, 1.0)
        self.assertEqual(row.sd_across_types, 0.0)
        self.assertEqual(row.crash_rate, 0.0)

    def test_sd_is_taken_over_type_combinations(self):
        outcomes = [
            outcome("sspe", 0, (0.0, 0.0), True),
            outcome("sspe", 1, (0.0, 0.0), True),
            outcome("sspe", 2, (1.0, 1.0), False, crash=True),
            outcome("sspe", 3, (1.0, 1.0), False),
        ]
        row = metrics_table(outcomes).iloc[0]
        self.assertAlmostEqual(row.mean_success, 0.5)
        self.assertAlmostEqual(row.sd_across_types, 0.5)
        self.assertAlmostEqual(row.crash_rate, 0.25)

    def test_population_sd_matches_numpy(self):
        values = [0.0, 0.5, 0.5, 1.0, 1.0]
        self.assertAlmostEqual(population_sd(values), float(np.std(values)))

    def test_rows_follow_model_order(self):
        outcomes = [outcome("sspe", 0, (0.0, 0.0), True), outcome("robust", 0, (0.0, 0.0), True)]
        table = metrics_table(outcomes, ["robust", "sspe"])
        self.assertEqual(list(table["model"]), ["robust", "sspe"])

    def test_stability_report_flags_less_stable_reference(self):
        table = pd.DataFrame([
            {"model": "robust", "scenario": "MBI", "mean_success": 0.8, "sd_across_types": 0.1, "crash_rate": 0.0},
            {"model": "level1", "scenario": "MBI", "mean_success": 0.5, "sd_across_types": 0.3, "crash_rate": 0.1},
            {"model": "sspe", "scenario": "MBI", "mean_success": 0.6, "sd_across_types": 0.2, "crash_rate": 0.0},
        ])
        with self.assertLogs("harness.metrics", level="WARNING"):
            report = stability_report(table)
        flags = {(r["reference"], r["model"]): r["deviation"] for r in report}
        self.assertEqual(flags, {
            (Model.ROBUST.label, Model.SSPE.label): False,
            (Model.LEVEL1.label, Model.SSPE.label): True,
        })

    def test_metrics_csv_is_stable(self):
        outcomes = [outcome("sspe", c, (0.0, float(c)), c % 2 == 0) for c in range(4)]
        with tempfile.TemporaryDirectory() as tmp:
            a = write_metrics(metrics_table(outcomes), FilePath(tmp) / "a.csv")
            b = write_metrics(metrics_table(outcomes), FilePath(tmp) / "b.csv")
            self.assertEqual(a.read_bytes(), b.read_bytes())
            self.assertEqual(a.read_text().splitlines()[0], "model,scenario,mean_success,sd_across_types,crash_rate")


class SweepTests(SimpleTestCase):
    def setUp(self):
        self.spec = pp_spec()
        self.cfg = small_config(stages=2, type_grid=(-1.0, 1.0))

    def test_type_combinations(self):
        self.assertEqual(len(type_combinations((-1.0, 0.0, 1.0), 2)), 9)
        self.assertEqual(len(type_combinations((-1.0, 0.0, 1.0), 3)), 27)

    def test_small_sweep(self):
        result = sweep(self.spec, self.cfg, models=("ac", "sspe"), jobs=1)
        self.assertEqual(len(result.outcomes), 24)
        self.assertEqual(list(result.table["model"]), ["ac", "sspe"])
        self.assertEqual([o.model for o in result.outcomes[:12]], ["ac"] * 12)
        self.assertEqual([o.cell for o in result.outcomes[:12]], list(range(12)))
        for o in result.outcomes:
            if o.crash:
                self.assertFalse(o.success)

    def test_sweep_is_deterministic(self):
        first = sweep(self.spec, self.cfg, models=("qlk",), jobs=1, seed=7)
        again = sweep(self.spec, self.cfg, models=("qlk",), jobs=1, seed=7)
        self.assertEqual([o.to_dict() for o in first.outcomes], [o.to_dict() for o in again.outcomes])

    def test_oversized_sweep_is_refused(self):
        with self.assertRaises(InvalidConfig):
            build_tasks(self.spec, self.cfg, ("ac", "sspe"), max_runs=10)

    @tag("slow")
    def test_parallel_sweep_matches_serial(self):
        serial = sweep(self.spec, self.cfg, models=("ac", "level1"), jobs=1)
        parallel = sweep(self.spec, self.cfg, models=("ac", "level1"), jobs=3)
        self.assertEqual([o.to_dict() for o in serial.outcomes], [o.to_dict() for o in parallel.outcomes])
        with tempfile.TemporaryDirectory() as tmp:
            a, _ = serial.write(tmp, "serial")
            b, _ = parallel.write(tmp, "parallel")
            self.assertEqual(a.read_bytes(), b.read_bytes())


class IngestTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = FilePath(tmp.name)

    def manifest(self, games):
        path = self.tmp / "manifest.json"
        path.write_text(json.dumps({"games": games}), encoding="utf-8")
        return path

    def test_fixture_games(self):
        records = ingest_trajectories(TRAJECTORIES, MANIFEST, horizon=6.0, dt=0.1)
        self.assertEqual([r.game_id for r in records], ["lt-proceed", "lt-yield"])
        proceed, yielding = records
        self.assertEqual(proceed.x.shape, (2, 61))
        self.assertAlmostEqual(proceed.duration, 6.0)
        self.assertEqual(proceed.maneuvers(0, 2.0, 3), [ManeuverClass.PROCEED] * 3)
        self.assertEqual(yielding.maneuvers(0, 2.0, 3), [ManeuverClass.WAIT] * 3)
        self.assertEqual(yielding.maneuvers(1, 2.0, 3), [ManeuverClass.PROCEED] * 3)
        self.assertAlmostEqual(yielding.x[0, 0], -30.0)

    def test_single_game_manifest(self):
        manifest = self.manifest([{"id": "only", "scenario": "RT", "agents": [1, 2], "t0_s": 0}])
        records = ingest_trajectories(TRAJECTORIES, manifest, horizon=6.0, dt=0.1)
        self.assertEqual(len(records), 1)
        self.assertEqual(records[0].agents, (1, 2))

    def test_row_order_does_not_matter(self):
        shuffled = self.tmp / "shuffled.csv"
        pd.read_csv(TRAJECTORIES).sample(frac=1.0, random_state=1).to_csv(shuffled, index=False)
        a = ingest_trajectories(TRAJECTORIES, MANIFEST, horizon=6.0, dt=0.1)
        b = ingest_trajectories(shuffled, MANIFEST, horizon=6.0, dt=0.1)
        for ra, rb in zip(a, b):
            for column in ("x", "y", "speed", "accel", "theta"):
                np.testing.assert_array_equal(getattr(ra, column), getattr(rb, column))

    def test_bad_header(self):
        broken = self.tmp / "broken.csv"
        pd.read_csv(TRAJECTORIES).rename(columns={"vx_ms": "vx"}).to_csv(broken, index=False)
        with self.assertRaises(SchemaError):
            ingest_trajectories(broken, MANIFEST)

    def test_non_numeric_values(self):
        broken = self.tmp / "broken.csv"
        frame = pd.read_csv(TRAJECTORIES).astype({"x_m": object})
        frame.loc[3, "x_m"] = "n/a"
        frame.to_csv(broken, index=False)
        with self.assertRaises(SchemaError):
            ingest_trajectories(broken, MANIFEST)

    def test_missing_frames(self):
        holed = self.tmp / "holed.csv"
        frame = pd.read_csv(TRAJECTORIES)
        frame = frame[~((frame.track_id == 1) & frame.t_s.between(1.0, 1.5))]
        frame.to_csv(holed, index=False)
        with self.assertRaises(GapError):
            ingest_trajectories(holed, MANIFEST, horizon=6.0, dt=0.1)

    def test_track_must_cover_horizon(self):
        late = self.manifest([{"id": "late", "scenario": "LT", "agents": [1, 2], "t0_s": 3.0}])
        with self.assertRaises(GapError):
            ingest_trajectories(TRAJECTORIES, late, horizon=6.0, dt=0.1)
        missing = self.manifest([{"id": "ghost", "scenario": "LT", "agents": [1, 99], "t0_s": 0.0}])
        with self.assertRaises(GapError):
            ingest_trajectories(TRAJECTORIES, missing, horizon=6.0, dt=0.1)

    def test_bad_manifest(self):
        for games in (
            [{"id": "g", "scenario": "IC", "agents": [1, 2], "t0_s": 0}],
            [{"id": "g", "scenario": "LT", "agents": [1], "t0_s": 0}],
            [{"id": "g", "scenario": "LT", "agents": [1, 2]}],
            [{"id": "g", "scenario": "LT", "agents": [1, 2], "t0_s": 0}] * 2,
        ):
            with self.subTest(games=games), self.assertRaises(SchemaError):
                ingest_trajectories(TRAJECTORIES, self.manifest(games))

    def test_export_then_ingest_keeps_maneuvers(self):
        records = ingest_trajectories(TRAJECTORIES, MANIFEST, horizon=6.0, dt=0.1)
        csv, manifest = export_records(records, self.tmp / "out.csv", self.tmp / "out.json")
        again = ingest_trajectories(csv, manifest, horizon=6.0, dt=0.1)
        for ra, rb in zip(records, again):
            for i in range(ra.n_agents):
                self.assertEqual(ra.maneuvers(i, 2.0, 3), rb.maneuvers(i, 2.0, 3))
            np.testing.assert_allclose(ra.x, rb.x, atol=1e-9)


class ManeuverClassificationTests(SimpleTestCase):
    def test_thresholds(self):
        t = np.linspace(0.0, 2.0, 21)
        self.assertEqual(classify_maneuver(t, np.full(21, 8.0)), ManeuverClass.PROCEED)
        self.assertEqual(classify_maneuver(t, np.linspace(8.0, 7.0, 21)), ManeuverClass.WAIT)
        self.assertEqual(classify_maneuver(t, np.linspace(8.0, 7.8, 21)), ManeuverClass.PROCEED)
        self.assertEqual(classify_maneuver(t, np.linspace(0.8, 0.4, 21)), ManeuverClass.WAIT)
        self.assertEqual(classify_maneuver(t, np.linspace(0.0, 0.5, 21)), ManeuverClass.PROCEED)
        with self.assertRaises(ValueError):
            classify_maneuver([0.0], [1.0])

    def test_agrees_with_generated_maneuvers(self):
        path = Path.from_points([(-50.0, 0.0), (200.0, 0.0)])
        for speed in (0.0, 3.0, 8.0, 14.0):
            state = VehicleState(x=0.0, y=0.0, vx=speed)
            for maneuver, band in itertools.product(ManeuverClass, TARGET_BANDS):
                try:
                    trajs = generate_trajectories(state, path, maneuver, n_samples=3, duration=2.0, band=band)
                except EmptyActionSet:
                    continue
                for traj in trajs:
                    with self.subTest(speed=speed, maneuver=maneuver, band=band, end=traj.v[-1]):
                        self.assertEqual(classify_maneuver(traj.t, traj.v), maneuver)


class MatchingTests(SimpleTestCase):
    def setUp(self):
        self.records = ingest_trajectories(TRAJECTORIES, MANIFEST, horizon=6.0, dt=0.1)
        self.cfg = small_config(stages=3)

    def test_automata_partition_the_records(self):
        ac = evaluate_records(self.records, "ac", self.cfg)
        nac = evaluate_records(self.records, "nac", self.cfg)
        self.assertEqual(ac.unplayable, nac.unplayable)
        self.assertAlmostEqual(ac.rate + nac.rate + nac.unplayable / len(self.records), 1.0)
        for a, n in zip(ac.results, nac.results):
            self.assertEqual(a.matched + n.matched, int(a.playable))

    def test_unplayable_records_are_counted_apart(self):
        with mock.patch("harness.matching.build_game_tree", side_effect=Stuck("no trajectory")):
            with self.assertLogs("harness.matching", "WARNING"):
                reports = [evaluate_records(self.records, model, self.cfg) for model in ("ac", "nac", "level1")]
        for report in reports:
            with self.subTest(model=report.model):
                self.assertEqual(report.rate, 0.0)
                self.assertEqual(report.to_dict()["unplayable"], len(self.records))
                self.assertFalse(any(r["playable"] for r in report.to_dict()["results"]))

    def test_lowest_aspiration_explains_everything(self):
        report = evaluate_records(self.records, "sspe", self.cfg)
        self.assertEqual(report.rate, 1.0)
        self.assertEqual(match_rate(self.records, "sspe", self.cfg), (report.rate, report.mean_gamma))
        for result in report.results:
            self.assertIn(result.gamma, self.cfg.type_grid)

    def test_first_stage_only(self):
        report = evaluate_records(self.records, "maxmax", self.cfg, MatchOptions(first_stage=True))
        self.assertEqual([len(r.observed) for r in report.results], [1, 1])
        self.assertTrue(report.to_dict()["first_stage"])

    def test_all_witnesses_listed_in_order(self):
        report = evaluate_records(self.records, "level1", self.cfg, MatchOptions(witness="all"))
        for result in report.to_dict()["results"]:
            if result["matched"]:
                self.assertEqual(result["witnesses"][0][0], result["gamma"])

    def test_reports_are_deterministic(self):
        first = evaluate_records(self.records, "qlk", self.cfg).to_dict()
        again = evaluate_records(self.records, "qlk", self.cfg).to_dict()
        self.assertEqual(first, again)

    def test_rejects_unknown_witness_mode(self):
        with self.assertRaises(ValueError):
            MatchOptions(witness="median")

    def test_record_shorter_than_horizon(self):
        with self.assertRaises(GapError):
            evaluate_records(self.records, "ac", small_config(stages=4))

    def test_played_equilibrium_is_recovered(self):
        spec = pp_spec()
        cfg = scenario_config(spec, small_config(stages=2))
        records = synthesize_records(spec, "sspe", cfg, types=(0.0, 0.0), speeds=(0.0, 9.0))
        self.assertEqual(len(records), 1)
        report = evaluate_records(records, "sspe", cfg)
        self.assertEqual(report.rate, 1.0)
        self.assertEqual(report.results[0].gamma, 0.0)
        self.assertIn((0.0, 0.0), report.results[0].witnesses)


class RecordSweepTests(TestCase):
    def test_sweep_is_stored_with_outcomes(self):
        spec = pp_spec()
        cfg = small_config(stages=2, type_grid=(0.0,))
        result = sweep(spec, cfg, models=("ac",), jobs=1)
        run = record_sweep(result, cfg, seed=0)
        run.refresh_from_db()
        self.assertEqual(run.status, SweepRun.Status.DONE)
        self.assertEqual(run.outcomes.count(), 3)
        self.assertEqual(run.metrics[0]["model"], "ac")
        self.assertEqual(run.config["horizon"], 4.0)
        self.assertIsNotNone(run.finished_at)


@tag("slow")
class BundledScenarioSweepTests(SimpleTestCase):
    """Full sweeps of the bundled scenarios over their studied models."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tables = {name: sweep(load_scenario(name), jobs=1).table.set_index("model") for name in ("ic", "mbi", "pp")}

    def test_no_crashes_at_the_intersection_or_the_merge(self):
        for name in ("ic", "pp"):
            table = self.tables[name]
            self.assertEqual(sorted(table.index), sorted(load_scenario(name).models))
            for model, crash in table["crash_rate"].items():
                with self.subTest(scenario=name, model=model):
                    self.assertEqual(crash, 0.0)

    def test_turn_lane_merge_crashes_least_under_sspe(self):
        crash = self.tables["mbi"]["crash_rate"]
        self.assertGreaterEqual(int((crash > 0).sum()), 3)
        for model in ("mspe", "level1", "robust"):
            with self.subTest(model=model):
                self.assertLess(crash["sspe"], crash[model])

    def test_stability_report_flags_match_the_table(self):
        for name in ("mbi", "pp"):
            table = self.tables[name].reset_index()
            flagged = []
            with self.subTest(scenario=name):
                if self.expected_deviations(table):
                    with self.assertLogs("harness.metrics", "WARNING") as logs:
                        report = stability_report(table)
                    flagged = logs.output
                else:
                    with self.assertNoLogs("harness.metrics", "WARNING"):
                        report = stability_report(table)
                self.assertEqual(len(report), 4)
                self.assertEqual(len(flagged), sum(e["deviation"] for e in report))
                self.assertEqual([e["deviation"] for e in report], self.expected_deviations(table, flags=True))

    @staticmethod
    def expected_deviations(table, flags=False):
        rows = table.set_index("model")
        out = []
        for ref in ("robust", "level1"):
            for model in ("sspe", "mspe"):
                r, e = rows.loc[ref], rows.loc[model]
                out.append(not (r.mean_success >= e.mean_success and r.sd_across_types <= e.sd_across_types))
        return out if flags else any(out)
