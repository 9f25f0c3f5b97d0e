# kinematics/services.py
import logging
import math

import numpy as np
from django.conf import settings

from . import constants
from .exceptions import EmptyActionSet, MismatchedSampling, OffPath
from .paths import Path
from .primitives import KinematicLimits, ManeuverClass, Trajectory, VehicleState

logger = logging.getLogger(__name__)


# --------------------- Speed profiles ---------------------

def classify_speed_profile(v_start: float, v_end: float, duration: float) -> ManeuverClass:
    """Wait if the mean acceleration is below -0.2 m/s² or the segment ends (nearly) stopped."""
    mean_accel = (v_end - v_start) / duration
    if mean_accel < constants.WAIT_MEAN_ACCEL or v_end < constants.STOP_SPEED:
        return ManeuverClass.WAIT
    return ManeuverClass.PROCEED


def speed_targets(v0: float, maneuver, limits: KinematicLimits, n_samples: int, duration: float,
                  band: str = constants.TARGET_BAND) -> np.ndarray:
    """
    Candidate end speeds, linearly spaced.

    lattice:    wait [0, v0), proceed [v0, v_max]
    reachable:  wait [max(0, v0 - d), v0), proceed [max(v0, v_stop), min(v_max, v0 + u)]
                where d and u are the largest speed changes a profile within
                the limits can make in ``duration``

    A stopped vehicle only waits by staying stopped. Candidates the wait/proceed
    classifier would tag differently are dropped; kinematic feasibility is
    checked per trajectory by the caller.
    """
    maneuver = ManeuverClass(maneuver)
    if band not in constants.TARGET_BANDS:
        raise ValueError(f"target band must be one of {constants.TARGET_BANDS}, got {band!r}")
    reachable = band == "reachable"
    if maneuver == ManeuverClass.WAIT:
        if v0 <= limits.speed_eps:
            raw = np.array([0.0])
        else:
            lo = max(0.0, v0 - max_speed_change(limits.a_min, limits, duration)) if reachable else 0.0
            raw = np.linspace(lo, v0, n_samples, endpoint=False)
    else:
        if reachable:
            hi = min(limits.v_max, v0 + max_speed_change(limits.a_max, limits, duration))
            lo = min(max(v0, constants.STOP_SPEED), hi)
        else:
            lo, hi = v0, max(v0, limits.v_max)
        raw = np.linspace(lo, hi, n_samples)

    raw = np.unique(np.round(raw, 9))
    keep = [vt for vt in raw if classify_speed_profile(v0, float(vt), duration) == maneuver]
    return np.array(keep, dtype=float)


def cubic_profile(v0: float, v_end: float, duration: float) -> np.ndarray:
    """
    Coefficients (c0..c3) of s(t) with s(0)=0, s'(0)=v0, s'(T)=v_end and
    s''(T)=0, so the trajectory arrives at its target speed without residual
    acceleration.
    """
    T = duration
    lhs = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 2 * T, 3 * T ** 2],
        [0.0, 0.0, 2.0, 6 * T],
    ])
    rhs = np.array([0.0, v0, v_end, 0.0])
    return np.linalg.solve(lhs, rhs)


def profile_extremes(v0: float, v_end: float, duration: float) -> tuple[float, float]:
    """(peak acceleration, jerk) of the cubic profile; the peak sits at t=0 and the jerk is constant."""
    dv = v_end - v0
    return 2.0 * dv / duration, -2.0 * dv / duration ** 2


def max_speed_change(accel: float, limits: KinematicLimits, duration: float) -> float:
    """Largest |v_end - v0| a cubic profile can reach with peak ``accel`` and the jerk limit."""
    return min(abs(accel) * duration / 2.0, limits.jerk_max * duration ** 2 / 2.0)


def profile_problems(v0: float, v_end: float, duration: float, limits: KinematicLimits,
                     tol: float = 1e-9) -> list[str]:
    accel, jerk = profile_extremes(v0, v_end, duration)
    problems = []
    if accel < limits.a_min - tol or accel > limits.a_max + tol:
        problems.append("acceleration")
    if abs(jerk) > limits.jerk_max + tol:
        problems.append("jerk")
    return problems


def sample_times(duration: float, dt: float) -> np.ndarray:
    steps = int(round(duration / dt))
    if steps < 1 or abs(steps * dt - duration) > 1e-9:
        raise ValueError(f"duration {duration}s is not a positive multiple of dt {dt}s")
    return np.round(np.arange(steps + 1) * dt, constants.TIME_DECIMALS)


# --------------------- Generation ---------------------

def _build(state: VehicleState, path: Path, s0: float, offset: float, v_end: float,
           maneuver: ManeuverClass, t: np.ndarray, dt: float) -> Trajectory:
    duration = float(t[-1])
    c = cubic_profile(state.speed, v_end, duration)
    s_rel = c[0] + c[1] * t + c[2] * t ** 2 + c[3] * t ** 3
    v = np.maximum(c[1] + 2 * c[2] * t + 3 * c[3] * t ** 2, 0.0)
    a = 2 * c[2] + 6 * c[3] * t
    travel = float(s_rel[-1])

    if travel <= 0.0:
        x = np.full_like(t, state.x)
        y = np.full_like(t, state.y)
        theta = np.full_like(t, state.theta)
    else:
        s = s0 + s_rel
        x, y, theta = path.locate(s)
        # lateral offset bleeds off in proportion to distance travelled
        lateral = offset * (1.0 - s_rel / travel)
        normal = path.normal_at(s)
        x = x + normal[:, 0] * lateral
        y = y + normal[:, 1] * lateral
        x[0], y[0], theta[0] = state.x, state.y, state.theta

    return Trajectory(
        origin=state, t=t, x=x, y=y, v=v, a=a, theta=theta,
        maneuver=maneuver, dt=dt, target_speed=float(v_end),
    )


def generate_trajectories(state: VehicleState, path: Path, maneuver, limits: KinematicLimits | None = None,
                          n_samples: int | None = None, duration: float | None = None,
                          dt: float | None = None, band: str | None = None) -> tuple[Trajectory, ...]:
    """Maneuver-tagged trajectories from ``state`` along ``path``, ordered by end speed."""
    maneuver = ManeuverClass(maneuver)
    limits = limits or KinematicLimits.from_settings()
    n_samples = n_samples or getattr(settings, "KINEMATICS_N_SAMPLES", constants.N_SAMPLES)
    duration = duration or constants.PERIOD_S
    dt = dt or getattr(settings, "KINEMATICS_DT_S", constants.DT_S)
    band = band or getattr(settings, "KINEMATICS_TARGET_BAND", constants.TARGET_BAND)
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")

    s0, offset = path.project(state.x, state.y)
    if abs(offset) > constants.LATERAL_TOLERANCE:
        raise OffPath(f"state ({state.x:.2f}, {state.y:.2f}) is {abs(offset):.2f} m off its path")

    t = sample_times(duration, dt)
    out = []
    for v_end in speed_targets(state.speed, maneuver, limits, n_samples, duration, band):
        problems = profile_problems(state.speed, float(v_end), duration, limits)
        if not problems:
            traj = _build(state, path, s0, offset, float(v_end), maneuver, t, dt)
            problems = check_limits(traj, limits)
        if problems:
            logger.debug("dropping %s target %.3f m/s: %s", maneuver.value, v_end, ", ".join(problems))
            continue
        out.append(traj)

    if not out:
        raise EmptyActionSet(f"no feasible {maneuver.value} trajectory at speed {state.speed:.3f} m/s")
    return tuple(out)


def check_limits(traj: Trajectory, limits: KinematicLimits, tol: float = 1e-6) -> list[str]:
    """Finite-difference limit check. Returns the names of violated bounds (empty if none)."""
    problems = []
    v = traj.v
    cap = max(limits.v_max, float(v[0])) + tol
    if np.any(v < -tol) or np.any(v > cap):
        problems.append("speed")

    moved = np.hypot(np.diff(traj.x), np.diff(traj.y)) / traj.dt
    if np.any(moved > math.hypot(cap, limits.lat_v_max) + tol):
        problems.append("path speed")

    accel = np.diff(v) / traj.dt
    if np.any(accel < limits.a_min - tol) or np.any(accel > limits.a_max + tol):
        problems.append("acceleration")

    if len(accel) > 1 and np.any(np.abs(np.diff(accel)) / traj.dt > limits.jerk_max + tol):
        problems.append("jerk")
    return problems


# --------------------- Geometry ---------------------

def trajectory_length(traj: Trajectory) -> float:
    return traj.length


def min_gap(traj_a: Trajectory, traj_b: Trajectory) -> float:
    if traj_a.n_samples != traj_b.n_samples or abs(traj_a.dt - traj_b.dt) > 1e-12:
        raise MismatchedSampling(
            f"cannot compare {traj_a.n_samples}x{traj_a.dt}s with {traj_b.n_samples}x{traj_b.dt}s"
        )
    return float(np.min(np.hypot(traj_a.x - traj_b.x, traj_a.y - traj_b.y)))


def extend_constant(traj: Trajectory, extra: float) -> Trajectory:
    """Continue straight along the final heading at the final speed for ``extra`` seconds."""
    if extra <= 0:
        raise ValueError("extra must be positive")
    tail = sample_times(extra, traj.dt)[1:]
    v_end = float(traj.v[-1])
    heading = float(traj.theta[-1])
    travel = v_end * tail
    return Trajectory(
        origin=traj.origin,
        t=np.round(traj.t[-1] + tail, constants.TIME_DECIMALS),
        x=np.concatenate([traj.x, traj.x[-1] + travel * math.cos(heading)]),
        y=np.concatenate([traj.y, traj.y[-1] + travel * math.sin(heading)]),
        v=np.concatenate([traj.v, np.full_like(tail, v_end)]),
        a=np.concatenate([traj.a, np.zeros_like(tail)]),
        theta=np.concatenate([traj.theta, np.full_like(tail, heading)]),
        maneuver=traj.maneuver,
        dt=traj.dt,
        target_speed=traj.target_speed,
    )


def window(traj: Trajectory, start: float, stop: float) -> Trajectory:
    """Samples on [start, stop], re-timed to begin at 0."""
    i0 = int(round(start / traj.dt))
    i1 = int(round(stop / traj.dt))
    if i0 < 0 or i1 >= traj.n_samples or i1 - i0 < 1:
        raise ValueError(f"window [{start}, {stop}] is outside the trajectory")
    sl = slice(i0, i1 + 1)
    return Trajectory(
        origin=traj.state_at(i0),
        t=np.round(traj.t[sl] - traj.t[i0], constants.TIME_DECIMALS),
        x=traj.x[sl], y=traj.y[sl], v=traj.v[sl], a=traj.a[sl], theta=traj.theta[sl],
        maneuver=traj.maneuver,
        dt=traj.dt,
        target_speed=traj.target_speed,
    )


def truncate(traj: Trajectory, duration: float) -> Trajectory:
    return window(traj, 0.0, duration)
