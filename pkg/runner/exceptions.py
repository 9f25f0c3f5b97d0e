from gamecore.exceptions import InvalidConfig


class ConfigError(InvalidConfig):
    """A run config file or command-line flag cannot be used."""
