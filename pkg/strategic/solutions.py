# strategic/solutions.py
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

from django.db import models

from .exceptions import SolverError


class SolutionConcept(models.TextChoices):
    SPNE = "spne", "Subgame-perfect Nash"
    SSPE = "sspe", "Safety-satisfied perfect equilibrium"
    MSPE = "mspe", "Maneuver-satisfied perfect equilibrium"
    LEVEL1 = "level1", "Level-1 against level-0 automata"
    QLK = "qlk", "Quantal level-k"
    ROBUST = "robust", "Robust response"


Entry = tuple[int, ...] | Mapping[int, float]


@dataclass(frozen=True)
class SolutionSet:
    """
    Per-history admissible action ids for each agent. Point concepts hold
    singletons, satisficing concepts hold sets, QLk holds {id: probability}.
    """

    concept: SolutionConcept
    entries: Mapping[str, Mapping[int, Entry]]
    flagged: tuple[str, ...] = ()
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "concept", SolutionConcept(self.concept))
        object.__setattr__(self, "flagged", tuple(sorted(self.flagged)))

    @property
    def probabilistic(self) -> bool:
        return self.concept == SolutionConcept.QLK

    def histories(self) -> list[str]:
        return sorted(self.entries)

    def probabilities(self, history_id: str, agent: int) -> dict[int, float]:
        entry = self.entries[history_id][agent]
        if isinstance(entry, Mapping):
            return dict(entry)
        return {i: 1.0 / len(entry) for i in entry}

    def admissible(self, history_id: str, agent: int) -> tuple[int, ...]:
        entry = self.entries[history_id][agent]
        if isinstance(entry, Mapping):
            return tuple(sorted(i for i, p in entry.items() if p > 0))
        return tuple(entry)

    def contains(self, history_id: str, agent: int, idx: int) -> bool:
        return idx in self.admissible(history_id, agent)

    def validate(self, tree) -> None:
        for history_id, per_agent in self.entries.items():
            node = tree.node(history_id)
            for agent, entry in per_agent.items():
                valid = set(node.action_ids(agent))
                ids = entry.keys() if isinstance(entry, Mapping) else entry
                if not set(ids) <= valid:
                    raise SolverError(f"{self.concept} lists unknown actions for agent {agent} at {history_id}")
                if isinstance(entry, Mapping) and not math.isclose(sum(entry.values()), 1.0, abs_tol=1e-9):
                    raise SolverError(f"{self.concept} probabilities at {history_id} do not sum to 1")

    def to_json(self) -> dict:
        def encode(entry):
            if isinstance(entry, Mapping):
                return {str(i): p for i, p in sorted(entry.items())}
            return list(entry)

        return {
            "concept": self.concept.value,
            "flagged": list(self.flagged),
            "meta": dict(self.meta),
            "solution": {
                h: {str(agent): encode(e) for agent, e in sorted(per_agent.items())}
                for h, per_agent in sorted(self.entries.items())
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)
