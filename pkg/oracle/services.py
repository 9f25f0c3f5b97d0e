# oracle/services.py
"""Differential checks: production solvers against the reference filters on seeded small games."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from gamecore.exceptions import GameError
from gamecore.testing import random_tree
from gamecore.tree import History
from nonstrategic.automata import automaton_support
from robust.hypotheses import HypothesisPredictor
from robust.planner import consistent_beliefs, robust_response
from strategic.equilibria import mspe_admissible, solve_equilibrium, sspe_admissible
from strategic.levelk import level1_set

from .constants import AUTOMATA, ORACLE_INSTANCES, VALUE_TOL
from .exceptions import TooLarge
from .filters import (
    HypothesisOracle,
    oracle_consistent_hypotheses,
    oracle_level0,
    oracle_level1,
    oracle_mspe,
    oracle_robust,
    oracle_sspe,
)
from .profiles import StrategyProfile, oracle_spne

logger = logging.getLogger(__name__)

CONCEPTS = ("spne", "sspe", "mspe", "AC", "NAC", "level1", "robust")
SKIP = "skip"


@dataclass
class ConceptReport:
    concept: str
    instances: int = 0
    passed: int = 0
    skipped: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "concept": self.concept,
            "instances": self.instances,
            "passed": self.passed,
            "skipped": self.skipped,
            "failed": len(self.failures),
            "status": "PASS" if self.ok else "FAIL",
        }


def instance_types(seed: int, tree) -> list[float]:
    rng = np.random.default_rng(seed)
    return [float(g) for g in rng.choice(tree.cfg.type_grid, size=tree.n_agents)]


# ----- per-concept comparisons; each returns None, SKIP or a failure message -----

def check_spne(tree, types):
    solution = solve_equilibrium(tree, types)
    if solution.flagged:
        return SKIP
    if StrategyProfile.of(solution.profile()) not in oracle_spne(tree, types):
        return f"equilibrium along {solution.path()} is not subgame perfect"
    return None


def _check_satisficing(tree, types, rule, reference):
    solution = solve_equilibrium(tree, types)
    profile = solution.profile()
    for node in tree.decision_nodes:
        for agent in range(tree.n_agents):
            got = rule(solution, node, agent)
            want = reference(node, agent, solution.types, profile, tree.cfg)
            if got != want:
                return f"{node.history_id} agent {agent}: {got} != {want}"
    return None


def check_sspe(tree, types):
    return _check_satisficing(tree, types, sspe_admissible, oracle_sspe)


def check_mspe(tree, types):
    return _check_satisficing(tree, types, mspe_admissible, oracle_mspe)


def _check_automaton(kind):
    def check(tree, types):
        cfg = tree.cfg
        for node in tree.decision_nodes:
            for agent in range(tree.n_agents):
                for gamma in cfg.type_grid:
                    got = automaton_support(kind, node, agent, gamma, cfg)[1]
                    want = oracle_level0(node, agent, kind, gamma, cfg)
                    if got != want:
                        return f"{kind}({gamma:g}) at {node.history_id} agent {agent}: {got} != {want}"
        return None
    return check


def check_level1(tree, types):
    responses = level1_set(tree, types)
    for node in tree.decision_nodes:
        for agent, gamma in enumerate(types):
            ref = oracle_level1(node, agent, gamma, tree.cfg)
            want = () if ref is None else (ref.choice,)
            got = tuple(responses.entries[node.history_id][agent])
            if got != want:
                return f"{node.history_id} agent {agent}: {got} != {want}"
    return None


def check_robust(tree, types, agent: int = 0):
    cfg = tree.cfg
    gamma_r = types[agent]
    predictor = HypothesisPredictor(tree, agent, gamma_r, cfg)
    equilibria = {g: predictor.equilibrium(g).profile() for g in cfg.type_grid}
    oracle = HypothesisOracle(agent, gamma_r, equilibria, cfg, tree.n_agents)
    for node in tree.decision_nodes:
        history = History(node)
        beliefs = consistent_beliefs(history, agent, predictor)
        reference_beliefs = {
            j: oracle_consistent_hypotheses(history, j, oracle) for j in range(tree.n_agents) if j != agent
        }
        for j, kept in reference_beliefs.items():
            got = {(t.model.value, t.gamma) for t in beliefs[j]}
            if got != set(kept):
                return f"{node.history_id}: beliefs about {j} differ by {sorted(got ^ set(kept))}"
        decision = robust_response(history, beliefs, gamma_r, tree, cfg, agent, predictor)
        ref = oracle_robust(node, agent, gamma_r, reference_beliefs, oracle, cfg)
        if decision.choice != ref.choice or decision.fallback != ref.fallback:
            return f"{node.history_id}: robust choice {decision.choice} != {ref.choice}"
        for own, score in ref.scores.items():
            if abs(decision.scores[own] - score) > VALUE_TOL:
                return f"{node.history_id}: score of {own} {decision.scores[own]} != {score}"
    return None


CHECKS = {
    "spne": check_spne,
    "sspe": check_sspe,
    "mspe": check_mspe,
    "level1": check_level1,
    "robust": check_robust,
    **{kind: _check_automaton(kind) for kind in AUTOMATA},
}


def run_checks(concepts=CONCEPTS, instances: int = ORACLE_INSTANCES, stages: int = 2, n_samples: int = 1,
               start_seed: int = 0, **overrides) -> list[ConceptReport]:
    """One report per concept over ``instances`` seeded crossing games."""
    unknown = set(concepts) - set(CHECKS)
    if unknown:
        raise ValueError(f"no differential check for {sorted(unknown)}")

    reports = {c: ConceptReport(c) for c in concepts}
    for seed in range(start_seed, start_seed + instances):
        try:
            tree = random_tree(seed, stages=stages, n_samples=n_samples, **overrides)
        except GameError as exc:
            logger.info("seed %d: no game (%s)", seed, exc)
            for report in reports.values():
                report.skipped += 1
            continue
        types = instance_types(seed, tree)
        for concept, report in reports.items():
            report.instances += 1
            try:
                outcome = CHECKS[concept](tree, types)
            except TooLarge as exc:
                logger.info("seed %d %s: %s", seed, concept, exc)
                outcome = SKIP
            if outcome == SKIP:
                report.skipped += 1
            elif outcome is None:
                report.passed += 1
            else:
                report.failures.append(f"seed {seed}: {outcome}")
                logger.warning("oracle mismatch for %s, seed %d: %s", concept, seed, outcome)

    for report in reports.values():
        logger.info("oracle %s: %s", report.concept, report.to_dict())
    return list(reports.values())
