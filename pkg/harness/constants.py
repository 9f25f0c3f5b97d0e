from kinematics.constants import STOP_SPEED

CRASH_GAP_M = 0.1           # a pairwise gap at or below this is a crash
STUCK_SPEED = STOP_SPEED    # final speed below this inside the box counts as stuck
ARC_STEP_M = 0.5            # discretization of line/arc scenario segments
MAX_FRAME_GAP_S = 0.5       # larger holes in a track are rejected
SPEED_DECIMALS = 6          # ingested speeds are compared at this resolution

SCENARIO_IDS = ("IC", "MBI", "PP")
AGENT_COUNTS = {"IC": 3, "MBI": 2, "PP": 2}
# roles the success predicates refer to
SCENARIO_ROLES = {"IC": ("left_turner",), "MBI": ("on_lane", "merger"), "PP": ("parked", "coming")}
RECORD_SCENARIOS = ("LT", "RT")

TRAJECTORY_COLUMNS = [
    "track_id", "frame", "t_s", "x_m", "y_m", "vx_ms", "vy_ms", "ax_ms2", "ay_ms2", "theta_rad",
]
METRICS_COLUMNS = ["model", "scenario", "mean_success", "sd_across_types", "crash_rate"]

WITNESS_MODES = ("min", "all")

MAX_RUNS = 200_000          # runs per sweep (models x initial points x type combinations)
