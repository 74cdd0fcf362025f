"""Trajectories, S-curve profiles and the three signature maneuvers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ik import IkError, select_solution, solve_full
from .kinematics import (
    body_height,
    fk_positions,
    full_fk,
    min_body_height,
    platform_height,
    separation_for_height,
)
from .model import JointState, Pose, StructuralParams, TargetSpec, validate_state

DEFAULT_DT = 1.0 / 60.0
DEFAULT_LINE_LIMITS = (150.0, 300.0, 1500.0)  # mm/s, mm/s^2, mm/s^3
TRAJ_HEADER = ("t_s", "a_mm", "b_mm", "theta1", "theta2", "theta3", "theta4", "x_mm", "y_mm", "z_mm")
VELOCITY_SLACK = 1e-6


class PlanningError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class InfeasibleError(PlanningError):
    def __init__(self, message: str, min_height: float):
        super().__init__(message)
        self.min_height = min_height


# --- trajectories ---------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    q: JointState
    tcp: Pose


@dataclass(frozen=True)
class JointTrajectory:
    points: tuple[TrajectoryPoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        t = self.times
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    @classmethod
    def from_states(cls, times, states, p: StructuralParams) -> JointTrajectory:
        return cls(tuple(TrajectoryPoint(float(t), q, full_fk(q, p)) for t, q in zip(times, states)))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([pt.t for pt in self.points], dtype=float)

    @property
    def states(self) -> np.ndarray:
        return np.array([pt.q.as_array() for pt in self.points], dtype=float).reshape(-1, 6)

    @property
    def positions(self) -> np.ndarray:
        return np.array([pt.tcp.translation for pt in self.points], dtype=float).reshape(-1, 3)

    @property
    def duration(self) -> float:
        return float(self.points[-1].t - self.points[0].t) if self.points else 0.0


def velocity_violations(traj: JointTrajectory, p: StructuralParams, slack: float = VELOCITY_SLACK) -> list[int]:
    """Indices ``i`` where the step ``i -> i+1`` exceeds a velocity limit."""
    if len(traj) < 2:
        return []
    q = traj.states
    dt = np.diff(traj.times)
    dq = np.abs(np.diff(q, axis=0))
    lim = np.array([p.v_max_slider] * 2 + [p.v_max_joint] * 4)
    bad = np.any(dq > lim * dt[:, None] + slack, axis=1)
    return [int(i) for i in np.flatnonzero(bad)]


def check_trajectory(traj: JointTrajectory, p: StructuralParams) -> list[str]:
    """Every broken trajectory invariant, as readable strings."""
    problems = []
    for i, pt in enumerate(traj):
        fk = full_fk(pt.q, p)
        if np.max(np.abs(fk.translation - pt.tcp.translation)) > 1e-9 or np.max(
            np.abs(fk.rotation - pt.tcp.rotation)
        ) > 1e-9:
            problems.append(f"point {i}: tcp differs from forward kinematics")
        verdict = validate_state(pt.q, p)
        if not verdict:
            problems.append(f"point {i}: {', '.join(verdict.violations)}")
    problems += [f"step {i}: velocity limit" for i in velocity_violations(traj, p)]
    return problems


def write_trajectory(traj: JointTrajectory, destination) -> Path:
    path = Path(destination)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJ_HEADER)
        for pt in traj:
            writer.writerow([repr(float(v)) for v in (pt.t, *pt.q.as_array(), *pt.tcp.translation)])
    return path


def read_trajectory(source, p: StructuralParams) -> JointTrajectory:
    path = Path(source)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJ_HEADER:
            raise ValueError(f"{path}: unexpected trajectory header {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    return JointTrajectory.from_states([r[0] for r in rows], [JointState.from_array(r[1:7]) for r in rows], p)


# --- S-curve ------------------------------------------------------------------


class ScurveProfile:
    """Jerk-limited rest-to-rest profile with up to seven phases.

    Phases: jerk up, constant accel, jerk down, cruise, jerk down, constant
    decel, jerk up. Phases collapse to zero length for short moves.
    """

    def __init__(self, distance: float, limits: tuple[float, float, float]):
        v_max, a_max, j_max = (float(x) for x in limits)
        if min(v_max, a_max, j_max) <= 0:
            raise ValueError("S-curve limits must be positive")
        self.distance = float(distance)
        self.limits = (v_max, a_max, j_max)
        self._sign = 1.0 if distance >= 0 else -1.0
        d = abs(self.distance)

        def ramp(v: float) -> tuple[float, float]:
            """Jerk-phase and constant-accel durations to reach v from rest."""
            if v * j_max >= a_max * a_max:
                return a_max / j_max, v / a_max - a_max / j_max
            return math.sqrt(v / j_max), 0.0

        def ramp_distance(v: float) -> float:
            tj, ta = ramp(v)
            return v * (2 * tj + ta) / 2.0

        if d == 0.0:
            v_peak = 0.0
        elif 2.0 * ramp_distance(v_max) <= d:
            v_peak = v_max
        else:
            # peak velocity for which accel + decel exactly cover the distance
            v_acc = (-a_max * a_max / j_max + math.sqrt((a_max * a_max / j_max) ** 2 + 4.0 * a_max * d)) / 2.0
            v_peak = v_acc if v_acc * j_max >= a_max * a_max else (d * d * j_max) ** (1.0 / 3.0)
            v_peak = min(v_peak, v_max)
        tj, ta = ramp(v_peak) if v_peak > 0 else (0.0, 0.0)
        tv = (d - 2.0 * ramp_distance(v_peak)) / v_peak if v_peak > 0 else 0.0
        self.peak_velocity = v_peak
        self.peak_acceleration = j_max * tj
        self.durations = np.array([tj, ta, tj, max(tv, 0.0), tj, ta, tj])
        self.jerks = np.array([j_max, 0.0, -j_max, 0.0, -j_max, 0.0, j_max])
        self.starts = np.concatenate([[0.0], np.cumsum(self.durations)])
        self.duration = float(self.starts[-1])
        # boundary states (p, v, a) at each phase start
        state = np.zeros((8, 3))
        for i, (T, j) in enumerate(zip(self.durations, self.jerks)):
            p0, v0, a0 = state[i]
            state[i + 1] = (
                p0 + v0 * T + a0 * T * T / 2.0 + j * T**3 / 6.0,
                v0 + a0 * T + j * T * T / 2.0,
                a0 + j * T,
            )
        self._state = state

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Position, velocity, acceleration and jerk at times ``t`` (clamped to the move)."""
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, 0.0, self.duration)
        k = np.clip(np.searchsorted(self.starts, tc, side="right") - 1, 0, 6)
        tau = tc - self.starts[k]
        p0, v0, a0 = self._state[k, 0], self._state[k, 1], self._state[k, 2]
        j = self.jerks[k]
        pos = p0 + v0 * tau + a0 * tau**2 / 2.0 + j * tau**3 / 6.0
        # clamps only absorb last-bit rounding at the plateaus
        v_max, a_max, _ = self.limits
        vel = np.clip(v0 + a0 * tau + j * tau**2 / 2.0, -v_max, v_max)
        acc = np.clip(a0 + j * tau, -a_max, a_max)
        done = t >= self.duration
        pos = np.where(done, abs(self.distance), pos)
        vel = np.where(done, 0.0, vel)
        acc = np.where(done, 0.0, acc)
        jerk = np.where(done | (t < 0), 0.0, j)
        s = self._sign
        return s * pos, s * vel, s * acc, s * jerk

    def time_at(self, progress) -> np.ndarray:
        """Earliest time at which the profile reaches ``progress`` (same sign as the distance)."""
        target = np.clip(np.abs(np.asarray(progress, dtype=float)), 0.0, abs(self.distance))
        lo = np.zeros_like(target)
        hi = np.full_like(target, self.duration)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = np.abs(self.evaluate(mid)[0]) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return hi


@dataclass(frozen=True, eq=False)
class SampledProfile:
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray
    duration: float
    peak_velocity: float


def scurve_profile(distance: float, limits: tuple[float, float, float], dt: float) -> SampledProfile:
    """Sample a jerk-limited move at a fixed step.

    Samples run at ``k*dt`` until the first one at or past the end of the
    move, so the last sample sits exactly at ``distance`` with zero velocity.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if min(limits) <= 0:
        raise ValueError("S-curve limits must be positive")
    prof = ScurveProfile(distance, limits)
    if prof.duration == 0.0:
        z = np.zeros(1)
        return SampledProfile(z, z.copy(), z.copy(), z.copy(), z.copy(), 0.0, 0.0)
    n = int(math.ceil(prof.duration / dt - 1e-12))
    t = dt * np.arange(n + 1)
    pos, vel, acc, jerk = prof.evaluate(t)
    return SampledProfile(t, pos, vel, acc, jerk, prof.duration, prof.peak_velocity)


def _joint_distance(states: np.ndarray, p: StructuralParams) -> np.ndarray:
    w = np.array([1.0, 1.0, p.d2, p.d2, p.d2, p.d2])
    return np.concatenate([[0.0], np.cumsum(np.max(np.abs(np.diff(states, axis=0)) * w, axis=1))])


def time_parameterize(
    states: list[JointState],
    p: StructuralParams,
    progress=None,
    limits: tuple[float, float, float] | None = None,
    dt: float = DEFAULT_DT,
) -> np.ndarray:
    """Timestamps for a waypoint sequence.

    ``progress`` (cumulative path length per waypoint, defaulting to a
    weighted joint distance) is timed by one S-curve over the whole path; the
    time axis is then stretched uniformly if any step would exceed a joint
    velocity limit.
    """
    q = np.array([s.as_array() for s in states]).reshape(-1, 6)
    n = len(q)
    if n == 1:
        return np.zeros(1)
    s = np.asarray(progress, dtype=float) if progress is not None else _joint_distance(q, p)
    if s[-1] <= 0.0 and progress is not None:
        s = _joint_distance(q, p)
    if s[-1] <= 0.0:
        return dt * np.arange(n)
    limits = limits or (p.v_max_slider, p.accel_max, p.jerk_max)
    t = ScurveProfile(float(s[-1]), limits).time_at(s)
    t[0] = 0.0
    gaps = np.diff(t)
    gaps = np.where(gaps > 0, gaps, dt)
    need = np.max(np.abs(np.diff(q, axis=0)) / np.array([p.v_max_slider] * 2 + [p.v_max_joint] * 4), axis=1)
    stretch = max(1.0, float(np.max(need / gaps)))
    return np.concatenate([[0.0], np.cumsum(gaps * stretch)])


# --- Cartesian line -------------------------------------------------------------------


def _home(p: StructuralParams) -> JointState:
    return JointState(0.5 * (p.a_min + p.a_max), p.b_min)


def interpolate_line(
    start: TargetSpec,
    end: TargetSpec,
    n_points: int,
    p: StructuralParams,
    current: JointState | None = None,
    limits: tuple[float, float, float] = DEFAULT_LINE_LIMITS,
    sweep: tuple[float, float, float] | None = None,
) -> JointTrajectory:
    """Straight TCP line from ``start`` to ``end`` through ``n_points`` waypoints.

    Each waypoint is solved analytically and the candidate nearest the
    previous waypoint is kept. Wrist angles are interpolated linearly when both
    endpoints command them.
    """
    if n_points < 2:
        raise PlanningError("a line needs at least two waypoints")
    p0 = np.array(start.position)
    p1 = np.array(end.position)
    sweep = sweep or (p.a_min, p.a_max, 1.0)
    prev = current or _home(p)
    states = []
    for i in range(n_points):
        f = i / (n_points - 1)
        pos = p0 + f * (p1 - p0)
        t3 = None if start.theta3 is None or end.theta3 is None else start.theta3 + f * (end.theta3 - start.theta3)
        t4 = start.theta4 + f * (end.theta4 - start.theta4)
        sols = solve_full(TargetSpec(tuple(pos), t3, t4), p, sweep, current=prev)
        if not sols:
            raise PlanningError(f"waypoint {i} unreachable ({sols.dominant_reason()})", index=i)
        prev = select_solution(sols, prev, p=p).state
        states.append(prev)
    positions = fk_positions(np.array([s.as_array() for s in states]), p)
    progress = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(positions, axis=0), axis=1))])
    times = time_parameterize(states, p, progress, limits)
    return JointTrajectory.from_states(times, states, p)


# --- pose hold ------------------------------------------------------------------------


@dataclass(frozen=True)
class PoseHoldPlan:
    trajectory: JointTrajectory
    t_end: float
    limit: str | None  # constraint that closed the window, None if the full duration fits


def base_transform(offset_x: float) -> Pose:
    return Pose(np.eye(3), np.array([offset_x, 0.0, 0.0]))


def _slider_travel(q: JointState, velocity: float, p: StructuralParams) -> tuple[float, str]:
    """Room for the counter-motion of slider a, and the limit that bounds it."""
    if velocity > 0:
        return q.a - p.a_min, "a_min"
    upper = min(p.a_max, p.rail_length - p.carriage - q.b)
    return upper - q.a, "a_max" if upper == p.a_max else "rail fit"


def plan_pose_hold(
    initial: JointState,
    base_velocity: float,
    duration: float,
    dt: float,
    p: StructuralParams,
) -> PoseHoldPlan:
    """Keep the world TCP pose fixed while the base moves along the rail axis.

    The base carries the rail frame forward by ``base_velocity * t``; slider
    a counter-moves by the same amount, which leaves every other joint and the
    world pose unchanged. The window closes at ``duration`` or when the slider
    runs out of travel, whichever comes first.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    verdict = validate_state(initial, p)
    if not verdict:
        raise PlanningError(f"initial state invalid: {', '.join(verdict.violations)}")
    if abs(base_velocity) > p.v_max_slider:
        return PoseHoldPlan(JointTrajectory(()), 0.0, "slider velocity")
    t_end, limit = float(duration), None
    if base_velocity != 0.0:
        travel, name = _slider_travel(initial, base_velocity, p)
        t_slide = max(travel, 0.0) / abs(base_velocity)
        if t_slide < t_end:
            t_end, limit = t_slide, name
    if t_end <= 0.0:
        return PoseHoldPlan(JointTrajectory(()), 0.0, limit)
    n = int(math.floor(t_end / dt + 1e-9))
    times = list(dt * np.arange(n + 1))
    if t_end - times[-1] > 1e-9:
        times.append(t_end)
    states = []
    for t in times:
        a = initial.a - base_velocity * t
        if base_velocity > 0:
            a = max(a, p.a_min)
        elif base_velocity < 0:
            a = min(a, initial.a + _slider_travel(initial, base_velocity, p)[0])
        states.append(initial.replace(a=a))
    return PoseHoldPlan(JointTrajectory.from_states(times, states, p), t_end, limit)


# --- duck under -----------------------------------------------------------------------


@dataclass(frozen=True)
class DuckPlan:
    trajectory: JointTrajectory
    phases: tuple[int, ...]  # 1 split, 2 traverse, 3 rise; one entry per point
    split_b: float

    def phase_states(self, phase: int) -> list[JointState]:
        return [pt.q for pt, ph in zip(self.trajectory, self.phases) if ph == phase]


def split_for_clearance(clearance_z: float, margin: float, p: StructuralParams) -> float:
    """Smallest separation whose body height is at most ``clearance_z - margin``."""
    floor = min_body_height(p)
    ceiling = clearance_z - margin
    if ceiling < floor:
        raise InfeasibleError(
            f"clearance {clearance_z} mm leaves {ceiling} mm; the lowest body height is {floor} mm", floor
        )
    zc = ceiling - p.stack_height
    if zc >= p.d1 + p.h + p.e1:
        return max(p.apex_b, p.b_min)
    b = separation_for_height(zc, p)
    # nudge past rounding so the height bound holds exactly
    while platform_height(b, p) + p.stack_height > ceiling and b < p.b_max:
        b = min(b + 1e-9 * max(1.0, b), p.b_max)
    return min(max(b, p.b_min), p.b_max)


def _phase(q0: JointState, field: str, target: float, p: StructuralParams, dt: float) -> list[JointState]:
    start = getattr(q0, field)
    prof = scurve_profile(target - start, (p.v_max_slider, p.accel_max, p.jerk_max), dt)
    return [q0.replace(**{field: start + float(x)}) for x in prof.position]


def plan_duck_under(
    current: JointState,
    clearance_z: float,
    travel_target_a: float,
    p: StructuralParams,
    margin: float = 10.0,
    dt: float = DEFAULT_DT,
) -> DuckPlan:
    """Split, traverse under an obstacle, then rise back to the starting separation."""
    verdict = validate_state(current, p)
    if not verdict:
        raise PlanningError(f"current state invalid: {', '.join(verdict.violations)}")
    if not p.a_min <= travel_target_a <= p.a_max:
        raise PlanningError(f"travel target {travel_target_a} outside slider travel")
    ceiling = clearance_z - margin
    if body_height(current, p) <= ceiling:
        b_split = current.b
    else:
        b_split = split_for_clearance(clearance_z, margin, p)
    for a in (current.a, travel_target_a):
        if a + b_split + p.carriage > p.rail_length:
            raise PlanningError(f"split separation {b_split:.3f} mm does not fit the rail at a={a}")

    split = _phase(current, "b", b_split, p, dt)
    split[-1] = split[-1].replace(b=b_split)
    traverse = _phase(split[-1], "a", travel_target_a, p, dt)
    traverse[-1] = traverse[-1].replace(a=travel_target_a)
    rise = _phase(traverse[-1], "b", current.b, p, dt)
    rise[-1] = rise[-1].replace(b=current.b)

    # join samples belong to the traverse, whose separation is already b_split
    states = split[:-1] + traverse + rise[1:]
    phases = [1] * (len(split) - 1) + [2] * len(traverse) + [3] * (len(rise) - 1)
    times = dt * np.arange(len(states))
    return DuckPlan(JointTrajectory.from_states(times, states, p), tuple(phases), b_split)


# --- reorientation about a point ----------------------------------------------------------


def plan_reorient(
    about,
    q0: JointState,
    target_theta3: float,
    target_theta4: float,
    n_steps: int,
    p: StructuralParams,
) -> JointTrajectory:
    """Change the wrist angles while the TCP stays at ``about``.

    Wrist angles move linearly in joint space; sliders and shoulder are
    re-solved at each step from the previous state.
    """
    about = np.asarray(about, dtype=float)
    if n_steps < 2:
        raise PlanningError("reorientation needs at least two steps")
    if np.linalg.norm(full_fk(q0, p).translation - about) > 1e-6:
        raise PlanningError("q0 does not place the TCP at the pivot point")
    lo3, hi3 = p.theta_limits[2]
    lo4, hi4 = p.theta_limits[3]
    if not (lo3 <= target_theta3 <= hi3 and lo4 <= target_theta4 <= hi4):
        raise PlanningError("target wrist angles outside joint limits")
    states = [q0]
    prev = q0
    for k in range(1, n_steps):
        f = k / (n_steps - 1)
        t3 = q0.theta3 + f * (target_theta3 - q0.theta3)
        t4 = q0.theta4 + f * (target_theta4 - q0.theta4)
        sols = solve_full(TargetSpec(tuple(about), t3, t4), p, (p.a_min, p.a_max, 1.0), current=prev)
        if not sols:
            raise PlanningError(f"step {k} unreachable ({sols.dominant_reason()})", index=k)
        try:
            prev = select_solution(sols, prev, p=p).state
        except IkError as exc:
            raise PlanningError(f"step {k}: {exc}", index=k) from None
        states.append(prev)
    return JointTrajectory.from_states(time_parameterize(states, p), states, p)
