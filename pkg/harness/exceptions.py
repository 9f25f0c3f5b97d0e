class DataError(Exception):
    """A trajectory log or game manifest cannot be used."""


class SchemaError(DataError):
    pass


class GapError(DataError):
    """A track misses frames for longer than the allowed gap."""


class ScenarioError(ValueError):
    pass
