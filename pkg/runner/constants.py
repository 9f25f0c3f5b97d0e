CONFIG_SCHEMA_VERSION = 1

# exit codes of the management commands
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DATA = 4

# concepts `solve` can write as a solution set
SOLVABLE_MODELS = ("spne", "sspe", "mspe", "level1", "qlk", "robust")
