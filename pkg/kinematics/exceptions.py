class KinematicsError(ValueError):
    pass


class EmptyActionSet(KinematicsError):
    """No target speed profile of the maneuver satisfies the limits."""


class MismatchedSampling(KinematicsError):
    pass


class OffPath(KinematicsError):
    pass
