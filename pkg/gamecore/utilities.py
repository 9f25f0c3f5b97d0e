# gamecore/utilities.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from kinematics.primitives import Trajectory
from kinematics.services import extend_constant, min_gap, window

from .config import GameConfig
from .constants import TOL
from .exceptions import GameError, MissingStrategy


@dataclass(frozen=True)
class StepUtilities:
    safety: float
    progress: float

    def __post_init__(self):
        if not -1 - TOL <= self.safety <= 1 + TOL:
            raise ValueError(f"safety utility {self.safety} outside [-1, 1]")
        if not -TOL <= self.progress <= 1 + TOL:
            raise ValueError(f"progress utility {self.progress} outside [0, 1]")


def check_type(gamma: float) -> float:
    gamma = float(gamma)
    if not -1 <= gamma <= 1:
        raise ValueError(f"agent type {gamma} outside [-1, 1]")
    return gamma


# ----- step utilities -----

def safety_utility(gap: float, cfg: GameConfig) -> float:
    if math.isinf(gap):
        return 1.0
    return 2.0 / (1.0 + math.exp(-cfg.alpha * (gap - cfg.d0))) - 1.0


def progress_utility(length: float, cfg: GameConfig) -> float:
    return min(length / cfg.progress_cap, 1.0)


def pairwise_gaps(joint: Sequence[Trajectory]) -> dict[tuple[int, int], float]:
    gaps = {}
    for i in range(len(joint)):
        for j in range(i + 1, len(joint)):
            gaps[(i, j)] = min_gap(joint[i], joint[j])
    return gaps


def nearest_gap(agent: int, n_agents: int, gaps: dict) -> float:
    others = [gaps[(min(agent, j), max(agent, j))] for j in range(n_agents) if j != agent]
    return min(others) if others else math.inf


def step_utilities(agent: int, joint: Sequence[Trajectory], cfg: GameConfig) -> StepUtilities:
    gaps = pairwise_gaps(joint)
    return StepUtilities(
        safety=safety_utility(nearest_gap(agent, len(joint), gaps), cfg),
        progress=progress_utility(joint[agent].length, cfg),
    )


def joint_step_utilities(joint: Sequence[Trajectory], cfg: GameConfig) -> tuple[StepUtilities, ...]:
    gaps = pairwise_gaps(joint)
    return tuple(
        StepUtilities(
            safety=safety_utility(nearest_gap(i, len(joint), gaps), cfg),
            progress=progress_utility(tr.length, cfg),
        )
        for i, tr in enumerate(joint)
    )


def continuation_utilities(joint: Sequence[Trajectory], cfg: GameConfig,
                           stages: int | None = None) -> tuple[StepUtilities, ...] | None:
    """
    Step utilities of every agent frozen on the constant extension of its final
    trajectory over ``stages`` extra periods (K_c by default). Progress is the
    per-period mean.
    """
    kc = cfg.cont_stages if stages is None else stages
    if kc == 0:
        return None
    extra = kc * cfg.period
    tails = []
    for tr in joint:
        start = tr.duration
        tails.append(window(extend_constant(tr, extra), start, start + extra))
    gaps = pairwise_gaps(tails)
    return tuple(
        StepUtilities(
            safety=safety_utility(nearest_gap(i, len(tails), gaps), cfg),
            progress=progress_utility(tail.length / kc, cfg),
        )
        for i, tail in enumerate(tails)
    )


def aggregate(u: StepUtilities, gamma: float) -> float:
    """Lexicographic threshold: safety while it is at or below the aspiration, progress otherwise."""
    return u.safety if u.safety <= gamma else u.progress


# ----- discounted returns -----

@dataclass(frozen=True)
class Returns:
    """Un-normalized discounted sums relative to a node (first stage weighted δ)."""

    safety: float = 0.0
    progress: float = 0.0
    combined: float = 0.0


def stage_return(step: StepUtilities, gamma: float, child: Returns, cfg: GameConfig) -> Returns:
    d = cfg.discount
    return Returns(
        safety=d * (step.safety + child.safety),
        progress=d * (step.progress + child.progress),
        combined=d * (aggregate(step, gamma) + child.combined),
    )


def terminal_return(cont: StepUtilities | None, stages: int, gamma: float, cfg: GameConfig) -> Returns:
    """Continuation utilities held for ``stages`` periods."""
    if cont is None or stages <= 0:
        return Returns()
    w = cfg.discount_sum(1, stages)
    return Returns(w * cont.safety, w * cont.progress, w * aggregate(cont, gamma))


def value(ret: Returns, remaining: int, gamma: float, cfg: GameConfig) -> float:
    w = cfg.total_weight(remaining)
    if cfg.aggregate_per_step:
        return ret.combined / w
    return aggregate(StepUtilities(ret.safety / w, ret.progress / w), gamma)


def safety_value(ret: Returns, remaining: int, cfg: GameConfig) -> float:
    return ret.safety / cfg.total_weight(remaining)


def weighted_value(steps: Sequence[float], continuation: float | None, cfg: GameConfig) -> float:
    """
    [Σ_{k=1..n} δ^k a_k + Σ_{k=n+1..n+K_c} δ^k a_C] / Σ_{k=1..n+K_c} δ^k
    for step values a_1..a_n and continuation value a_C.
    """
    n = len(steps)
    total = sum(cfg.discount ** k * a for k, a in enumerate(steps, start=1))
    if continuation is not None:
        total += cfg.discount_sum(n + 1, n + cfg.cont_stages) * continuation
    return total / cfg.discount_sum(1, n + cfg.cont_stages)


def discounted_value(history, profile, agent: int, gamma: float, cfg: GameConfig) -> float:
    """
    Value of ``agent`` from the node ending ``history`` when every agent follows
    ``profile`` (history id → joint action ids) to the end of the horizon.
    Sums the stages literally instead of using the backward recursion.
    """
    node = getattr(history, "node", history)
    remaining = cfg.stages - node.depth
    safeties, progresses = [], []
    current = node
    while not current.is_terminal:
        try:
            joint = tuple(profile[current.history_id])
        except KeyError:
            raise MissingStrategy(f"profile undefined at history {current.history_id}")
        step = current.step_utilities(joint)[agent]
        safeties.append(step.safety)
        progresses.append(step.progress)
        current = current.children[joint]

    held = remaining - len(safeties)
    cont = current.continuation()
    cont_u = cont[agent] if cont is not None else None
    if not safeties and cont_u is None:
        raise GameError(f"history {node.history_id} has no stage left to value")

    # stuck branches hold the continuation over the skipped in-horizon stages too
    s_steps = safeties + ([cont_u.safety] * held if cont_u is not None else [])
    p_steps = progresses + ([cont_u.progress] * held if cont_u is not None else [])
    if cfg.aggregate_per_step:
        a_steps = [aggregate(StepUtilities(s, p), gamma) for s, p in zip(s_steps, p_steps)]
        a_cont = aggregate(cont_u, gamma) if cont_u is not None else None
        return weighted_value(a_steps, a_cont, cfg)
    s_val = weighted_value(s_steps, cont_u.safety if cont_u is not None else None, cfg)
    p_val = weighted_value(p_steps, cont_u.progress if cont_u is not None else None, cfg)
    return aggregate(StepUtilities(s_val, p_val), gamma)


def mix_returns(weights: Sequence[float], returns: Sequence[Returns]) -> Returns:
    """Probability-weighted mixture of returns."""
    return Returns(
        safety=sum(w * r.safety for w, r in zip(weights, returns)),
        progress=sum(w * r.progress for w, r in zip(weights, returns)),
        combined=sum(w * r.combined for w, r in zip(weights, returns)),
    )
