from gamecore.exceptions import GameError


class SolverError(GameError):
    pass


class NoPureEquilibrium(SolverError):
    """A stage payoff matrix has no pure Nash cell and the fallback is disabled."""


class EmptyBelief(SolverError):
    """No grid type of either automaton is consistent with the observed play."""
