DT_S = 0.1              # sample step, seconds
V_MAX = 14.0            # m/s
A_MIN = -4.5            # m/s²
A_MAX = 3.0             # m/s²
JERK_MAX = 10.0         # m/s³
LAT_V_MAX = 2.0         # m/s
SPEED_EPS = 0.1         # ε_v, m/s
N_SAMPLES = 3           # trajectories per maneuver
PERIOD_S = 2.0          # default trajectory duration, seconds

STOP_SPEED = 0.5        # below this a vehicle counts as stopped, m/s
WAIT_MEAN_ACCEL = -0.2  # mean accel below this is a wait, m/s²

LATERAL_TOLERANCE = 1.5  # max distance from the path centerline, m
TIME_DECIMALS = 9        # sample times are rounded so equal grids compare exactly

# Target end speeds per maneuver:
#   lattice:   wait in [0, v), proceed in [v, v_max]; infeasible targets are dropped
#   reachable: the same bands clipped to what the limits reach in one period
TARGET_BANDS = ("lattice", "reachable")
TARGET_BAND = "lattice"
