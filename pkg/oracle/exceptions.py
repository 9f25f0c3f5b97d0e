from strategic.exceptions import SolverError


class TooLarge(SolverError):
    """The brute-force enumeration would exceed its profile limit."""
