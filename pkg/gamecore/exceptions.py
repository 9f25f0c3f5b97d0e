class GameError(Exception):
    pass


class MissingStrategy(GameError):
    """A strategy profile has no joint action at a reachable history."""


class Stuck(GameError):
    pass


class InvalidConfig(GameError, ValueError):
    pass
