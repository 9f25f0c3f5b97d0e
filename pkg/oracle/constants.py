PROFILE_LIMIT = 10 ** 7
NODE_LIMIT = 20_000     # subtree size the reference filters will walk
VALUE_TOL = 1e-9        # absolute tolerance on value comparisons

ORACLE_INSTANCES = 200

# hypothesis labels, in the order belief sets are enumerated
AUTOMATA = ("AC", "NAC")
MODEL_ORDER = ("AC", "NAC", "level1", "sspe", "mspe")
