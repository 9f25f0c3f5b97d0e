# harness/matching.py
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from gamecore.config import GameConfig
from gamecore.constants import TOL
from gamecore.exceptions import GameError
from gamecore.tree import GameNode, GameTree, ObservedHistory, Observation, build_game_tree
from kinematics.exceptions import KinematicsError
from kinematics.primitives import ManeuverClass
from nonstrategic.baselines import maxmax_support
from robust.hypotheses import BeliefSet, HypothesisPredictor, expand_types
from robust.planner import robust_response
from strategic.beliefs import BeliefL1, belief_from_summaries, summarize, update_consistent_belief
from strategic.constants import QLK_MATCH_PROBABILITY
from strategic.equilibria import mspe_admissible, solve_equilibrium, sspe_admissible
from strategic.exceptions import EmptyBelief
from strategic.levelk import Level1Planner
from strategic.qlk import QLkPlanner

from .constants import WITNESS_MODES
from .exceptions import GapError
from .ingest import GameRecord
from .policies import Model, qlk_lambda

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchOptions:
    witness: str = "min"
    first_stage: bool = False
    lam: float | None = None
    subject: int = 0

    def __post_init__(self):
        if self.witness not in WITNESS_MODES:
            raise ValueError(f"witness must be one of {', '.join(WITNESS_MODES)}")


def witness_key(types: Sequence[float]):
    """Smallest subject |γ| first, then smallest total |γ|, then lexicographic."""
    return abs(types[0]), sum(abs(g) for g in types), tuple(types)


# ----- stage games -----

class StagedRecord:
    """
    A record cut into stage games: stage k is rooted at the observed joint
    state at k periods with the remaining stages left to play.
    """

    def __init__(self, record: GameRecord, cfg: GameConfig, options: MatchOptions):
        if record.duration < cfg.horizon - 1e-9:
            raise GapError(f"game {record.game_id} lasts {record.duration:g}s, less than the {cfg.horizon:g}s horizon")
        self.record = record
        self.cfg = cfg
        self.subject = options.subject
        self.n_stages = 1 if options.first_stage else cfg.stages
        self.paths = record.agent_paths()
        self.maneuvers = [record.maneuvers(i, cfg.period, self.n_stages) for i in range(record.n_agents)]

    def stage_config(self, k: int) -> GameConfig:
        return self.cfg.with_overrides(
            horizon=(self.cfg.stages - k) * self.cfg.period,
            continuation_stages=self.cfg.cont_stages,
        )

    @cached_property
    def trees(self) -> list[GameTree] | None:
        trees = []
        for k in range(self.n_stages):
            states = self.record.states(self.record.index_at(k * self.cfg.period))
            try:
                trees.append(build_game_tree(states, self.stage_config(k), self.paths))
            except (GameError, KinematicsError) as exc:
                logger.warning("game %s stage %d: no game (%s)", self.record.game_id, k, exc)
                return None
        return trees

    @property
    def roots(self) -> list[GameNode]:
        return [tree.root for tree in self.trees]

    def observed(self, k: int, agent: int | None = None) -> ManeuverClass:
        return self.maneuvers[self.subject if agent is None else agent][k]

    def history(self, k: int) -> ObservedHistory:
        """Maneuver-level play over the stages before ``k``."""
        return ObservedHistory([
            (self.trees[s].root, [self.maneuvers[i][s] for i in range(self.record.n_agents)])
            for s in range(k)
        ])

    def offers(self, k: int, ids) -> bool:
        root = self.trees[k].root
        return any(root.maneuver_of(self.subject, i) == self.observed(k) for i in ids)


# ----- per-model indicators; each returns the witnessing type tuples -----

def _automaton_witnesses(staged: StagedRecord, kind: str) -> list[tuple[float, ...]]:
    """
    AC explains the record when its consistent interval is non-empty. NAC covers
    every other playable record; its witness comes from its own interval when
    that is non-empty.
    """
    summaries = [
        summarize(Observation(root, staged.observed(k)), staged.subject)
        for k, root in enumerate(staged.roots)
    ]
    belief = belief_from_summaries(summaries, staged.cfg.ac_condition_direction)
    ac_matched = not belief.ac.empty
    if kind == Model.AC:
        return [(belief.ac.witness(),)] if ac_matched else []
    if ac_matched:
        return []
    gamma = belief.nac.witness()
    return [(gamma,)] if gamma is not None else [()]


def _stage_beliefs(staged: StagedRecord, k: int) -> dict[int, BeliefL1]:
    history = staged.history(k)
    beliefs = {}
    for j in range(staged.record.n_agents):
        if j == staged.subject:
            continue
        belief = update_consistent_belief(history, j, staged.cfg)
        if belief.is_empty_on(staged.cfg.type_grid):
            logger.warning("game %s stage %d: no level-0 type explains agent %d; resetting the belief",
                           staged.record.game_id, k, j)
            belief = BeliefL1()
        beliefs[j] = belief
    return beliefs


def _level1_witnesses(staged: StagedRecord) -> list[tuple[float, ...]]:
    found = []
    beliefs = [_stage_beliefs(staged, k) for k in range(staged.n_stages)]
    for gamma in staged.cfg.type_grid:
        matched = True
        for k, tree in enumerate(staged.trees):
            try:
                planner = Level1Planner(tree, staged.subject, gamma, beliefs[k], tree.cfg)
            except EmptyBelief:
                planner = Level1Planner(tree, staged.subject, gamma, None, tree.cfg)
            if not staged.offers(k, planner.tie_set(tree.root)):
                matched = False
                break
        if matched:
            found.append((gamma,))
    return found


def _maxmax_witnesses(staged: StagedRecord) -> list[tuple[float, ...]]:
    return [
        (gamma,) for gamma in staged.cfg.type_grid
        if all(staged.offers(k, maxmax_support(tree.root, staged.subject, gamma, tree.cfg))
               for k, tree in enumerate(staged.trees))
    ]


def _combinations(staged: StagedRecord):
    return itertools.product(staged.cfg.type_grid, repeat=staged.record.n_agents)


def _with_subject_first(staged: StagedRecord, combo) -> tuple[float, ...]:
    s = staged.subject
    return (combo[s],) + tuple(g for i, g in enumerate(combo) if i != s)


def _equilibrium_witnesses(staged: StagedRecord, model: Model) -> list[tuple[float, ...]]:
    found = []
    for combo in _combinations(staged):
        matched = True
        for k, tree in enumerate(staged.trees):
            solution = solve_equilibrium(tree, combo, tree.cfg)
            root = tree.root
            if model == Model.SPNE:
                ids = (solution.choice[root.history_id][staged.subject],)
            elif model == Model.SSPE:
                ids = sspe_admissible(solution, root, staged.subject)
            else:
                ids = mspe_admissible(solution, root, staged.subject)
            if not staged.offers(k, ids):
                matched = False
                break
        if matched:
            found.append(_with_subject_first(staged, combo))
    return found


def _qlk_witnesses(staged: StagedRecord, lam: float) -> list[tuple[float, ...]]:
    found = []
    for combo in _combinations(staged):
        probability = 1.0
        for k, tree in enumerate(staged.trees):
            dist = QLkPlanner(tree, staged.subject, combo, lam, tree.cfg).distribution(tree.root)
            probability *= sum(p for i, p in dist.items() if tree.root.maneuver_of(staged.subject, i) == staged.observed(k))
            if probability < QLK_MATCH_PROBABILITY:
                break
        if probability >= QLK_MATCH_PROBABILITY:
            found.append(_with_subject_first(staged, combo))
    return found


def _robust_beliefs(staged: StagedRecord, k: int, predictors: list[HypothesisPredictor]) -> dict[int, BeliefSet]:
    """Hypotheses whose stage-game predictions contain each opponent's observed maneuvers before ``k``."""
    cfg = staged.cfg
    out = {}
    for j in range(staged.record.n_agents):
        if j == staged.subject:
            continue
        kept = []
        for hypothesis in expand_types(cfg.type_grid):
            misses = sum(
                not predictors[s].consistent(Observation(staged.trees[s].root, staged.observed(s, j)), j, hypothesis)
                for s in range(k)
            )
            if misses <= cfg.robust_slack:
                kept.append(hypothesis)
        out[j] = BeliefSet.of(kept)
    return out


def _robust_witnesses(staged: StagedRecord) -> list[tuple[float, ...]]:
    found = []
    for gamma in staged.cfg.type_grid:
        predictors = [HypothesisPredictor(tree, staged.subject, gamma, tree.cfg) for tree in staged.trees]
        matched = True
        for k, tree in enumerate(staged.trees):
            beliefs = _robust_beliefs(staged, k, predictors)
            decision = robust_response(tree.root, beliefs, gamma, tree, tree.cfg, staged.subject, predictors[k])
            top = max(decision.scores.values())
            ties = [i for i, s in decision.scores.items() if s >= top - TOL]
            if not staged.offers(k, ties):
                matched = False
                break
        if matched:
            found.append((gamma,))
    return found


def model_witnesses(staged: StagedRecord, model, options: MatchOptions) -> list[tuple[float, ...]]:
    model = Model(model)
    if staged.trees is None:
        return []
    if model in (Model.AC, Model.NAC):
        return _automaton_witnesses(staged, model)
    if model == Model.LEVEL1:
        return _level1_witnesses(staged)
    if model == Model.MAXMAX:
        return _maxmax_witnesses(staged)
    if model == Model.QLK:
        return _qlk_witnesses(staged, qlk_lambda() if options.lam is None else options.lam)
    if model == Model.ROBUST:
        return _robust_witnesses(staged)
    return _equilibrium_witnesses(staged, model)


# ----- reports -----

@dataclass
class MatchResult:
    game_id: str
    model: str
    observed: list[str]
    witnesses: list[tuple[float, ...]] = field(default_factory=list)
    playable: bool = True

    @property
    def matched(self) -> bool:
        return bool(self.witnesses)

    @property
    def witness(self) -> tuple[float, ...] | None:
        typed = [w for w in self.witnesses if w and w[0] is not None]
        return min(typed, key=witness_key) if typed else None

    @property
    def gamma(self) -> float | None:
        w = self.witness
        return None if w is None else float(w[0])

    def to_dict(self, witness_mode: str = "min") -> dict:
        out = {
            "game": self.game_id,
            "model": self.model,
            "observed": self.observed,
            "matched": self.matched,
            "gamma": self.gamma,
            "playable": self.playable,
        }
        if witness_mode == "all":
            out["witnesses"] = [list(w) for w in sorted((w for w in self.witnesses if w and w[0] is not None),
                                                         key=witness_key)]
        return out


@dataclass
class MatchReport:
    model: str
    results: list[MatchResult]
    options: MatchOptions = MatchOptions()

    @property
    def rate(self) -> float:
        if not self.results:
            return 0.0
        return sum(r.matched for r in self.results) / len(self.results)

    @property
    def unplayable(self) -> int:
        """Records whose stage games could not be built; no model explains them."""
        return sum(not r.playable for r in self.results)

    @property
    def mean_gamma(self) -> float | None:
        gammas = [r.gamma for r in self.results if r.matched and r.gamma is not None]
        return float(np.mean(gammas)) if gammas else None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "label": Model(self.model).label,
            "games": len(self.results),
            "matched": sum(r.matched for r in self.results),
            "rate": self.rate,
            "unplayable": self.unplayable,
            "mean_gamma": self.mean_gamma,
            "witness": self.options.witness,
            "first_stage": self.options.first_stage,
            "results": [r.to_dict(self.options.witness) for r in self.results],
        }


def evaluate_records(records: Sequence[GameRecord], model, cfg: GameConfig | None = None,
                     options: MatchOptions | None = None) -> MatchReport:
    model = Model(model)
    cfg = cfg or GameConfig.from_settings()
    options = options or MatchOptions()
    results = []
    for record in records:
        staged = StagedRecord(record, cfg, options)
        witnesses = model_witnesses(staged, model, options)
        results.append(MatchResult(
            game_id=record.game_id,
            model=model.value,
            observed=[m.value for m in staged.maneuvers[options.subject]],
            witnesses=witnesses,
            playable=staged.trees is not None,
        ))
    report = MatchReport(model.value, results, options)
    logger.info("%s: %d of %d games matched, %d unplayable", model.label, sum(r.matched for r in results),
                len(results), report.unplayable)
    return report


def match_rate(records: Sequence[GameRecord], model, cfg: GameConfig | None = None,
               options: MatchOptions | None = None) -> tuple[float, float | None]:
    """Fraction of records some type assignment explains, and the mean witnessing subject type."""
    report = evaluate_records(records, model, cfg, options)
    return report.rate, report.mean_gamma
