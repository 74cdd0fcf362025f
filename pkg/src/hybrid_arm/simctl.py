"""Closed-loop tracking simulation: segmented PID, a saturated plant and the fixed-rate loop."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .kinematics import fk_positions
from .model import JOINT_NAMES, ControllerConfig, PidGains, StructuralParams
from .motion import JointTrajectory

LOG_HEADER = ("t_s", "axis", "target", "actual", "command")


class SimulationError(RuntimeError):
    def __init__(self, message: str, tick: int):
        super().__init__(message)
        self.tick = tick


@dataclass(frozen=True)
class AxisLimits:
    v_max: float
    a_max: float
    damping: float = 0.0  # 1/s


@dataclass(frozen=True)
class PlantParams:
    """Per-class actuator limits; slider speed defaults to 1.5 m/s."""

    slider: AxisLimits = AxisLimits(1500.0, 5000.0, 2.0)
    joint: AxisLimits = AxisLimits(math.pi, 20.0, 2.0)
    hold_time: float = 0.5  # s simulated after the plan ends
    settle_band: float = 0.1  # mm

    def axis(self, i: int) -> AxisLimits:
        return self.slider if i < 2 else self.joint


@dataclass(frozen=True)
class PlantState:
    position: float
    velocity: float
    v_max: float
    a_max: float
    damping: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.position):
            raise ValueError("plant position must be finite")
        if abs(self.velocity) > self.v_max * (1 + 1e-12):
            raise ValueError("plant velocity above its limit")


def plant_step(state: PlantState, command: float, dt: float) -> PlantState:
    """Damped double integrator with acceleration and velocity saturation.

    ``accel = clamp(command - damping * v, +-a_max)``; the new velocity is
    clamped to ``+-v_max`` and integrated into the position (semi-implicit
    Euler).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    accel = min(max(command - state.damping * state.velocity, -state.a_max), state.a_max)
    v = min(max(state.velocity + accel * dt, -state.v_max), state.v_max)
    return PlantState(state.position + v * dt, v, state.v_max, state.a_max, state.damping)


def select_segment(error: float, cfg: ControllerConfig) -> int:
    """Gain-segment index for ``|error|``; a value on a breakpoint belongs to the lower segment."""
    e = abs(error)
    for i, bound in enumerate(cfg.segment_bounds):
        if e <= bound:
            return i
    return len(cfg.segment_bounds) - 1


def _pid(error, integrator, prev_error, gains: PidGains, dt, command_limit):
    integrator = integrator + error * dt
    if gains.ki > 0 and math.isfinite(command_limit):
        bound = command_limit / gains.ki
        integrator = min(max(integrator, -bound), bound)
    command = gains.kp * error + gains.ki * integrator + gains.kd * (error - prev_error) / dt
    return command, integrator


def segmented_pid_step(
    error: float,
    integrator: float,
    prev_error: float,
    cfg: ControllerConfig,
    dt: float,
    command_limit: float = math.inf,
) -> tuple[float, float]:
    """One PID update with gains chosen by the error band.

    The integral term is clamped so that ``|ki * integral|`` never exceeds
    ``command_limit``. Switching segments swaps gains but keeps the integral.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    gains = cfg.gains[select_segment(error, cfg)]
    return _pid(error, integrator, prev_error, gains, dt, command_limit)


def compute_rmse(target, actual) -> float:
    """Root mean square of the Euclidean distance between matching rows."""
    t = np.atleast_2d(np.asarray(target, dtype=float))
    a = np.atleast_2d(np.asarray(actual, dtype=float))
    if t.size == 0:
        raise ValueError("empty log")
    if t.shape != a.shape:
        raise ValueError("target and actual logs differ in shape")
    return float(np.sqrt(np.mean(np.sum((t - a) ** 2, axis=1))))


@dataclass(frozen=True, eq=False)
class TrackingReport:
    t: np.ndarray  # (n,)
    target: np.ndarray  # (n, 6) joint targets
    actual: np.ndarray  # (n, 6)
    command: np.ndarray  # (n, 6)
    target_xyz: np.ndarray  # (n, 3)
    actual_xyz: np.ndarray  # (n, 3)
    segments: np.ndarray  # (n, 2) slider gain segment per tick
    rmse: float
    max_error: float
    settling_time: float | None
    extras: dict = field(default_factory=dict)

    @property
    def ticks(self) -> int:
        return len(self.t)

    @property
    def errors(self) -> np.ndarray:
        return np.linalg.norm(self.target_xyz - self.actual_xyz, axis=1)

    def summary(self) -> dict:
        return {
            "rmse_mm": self.rmse,
            "max_error_mm": self.max_error,
            "settling_time_s": self.settling_time,
            "ticks": self.ticks,
        }


class _Reference:
    """Smooth joint reference through the plan's waypoints (clamped cubic, zero end velocity)."""

    def __init__(self, plan: JointTrajectory):
        self.t = plan.times
        self.q = plan.states
        self.spline = CubicSpline(self.t, self.q, axis=0, bc_type="clamped") if len(self.t) > 1 else None

    def __call__(self, t: float):
        if self.spline is None or t >= self.t[-1]:
            return self.q[-1], np.zeros(6), np.zeros(6)
        t = max(t, self.t[0])
        return self.spline(t), self.spline(t, 1), self.spline(t, 2)


def settling_time(t: np.ndarray, errors: np.ndarray, band: float) -> float | None:
    outside = np.flatnonzero(errors > band)
    if len(outside) == 0:
        return float(t[0])
    if outside[-1] == len(errors) - 1:
        return None
    return float(t[outside[-1] + 1])


def run_tracking(
    plan: JointTrajectory,
    cfg: ControllerConfig,
    plant: PlantParams,
    p: StructuralParams,
) -> TrackingReport:
    """Simulate all six axes following ``plan`` at ``cfg.loop_rate``.

    Sliders run the segmented PID on position error. Revolute joints add the
    reference acceleration (plus damping compensation) as feedforward to a
    PID. The plant starts at the first plan state, at rest.
    """
    if len(plan) == 0:
        raise ValueError("empty plan")
    dt = cfg.dt
    ref = _Reference(plan)
    t0 = plan.times[0]
    n = int(math.floor((plan.duration + plant.hold_time) / dt + 1e-9)) + 1
    axes = [plant.axis(i) for i in range(6)]
    state = [PlantState(float(x), 0.0, ax.v_max, ax.a_max, ax.damping) for x, ax in zip(plan.states[0], axes)]
    integ = np.zeros(6)
    prev_err = np.zeros(6)

    times = t0 + dt * np.arange(n)
    target = np.empty((n, 6))
    actual = np.empty((n, 6))
    command = np.empty((n, 6))
    segments = np.empty((n, 2), dtype=int)
    for k, t in enumerate(times):
        q_ref, v_ref, a_ref = ref(t)
        target[k] = q_ref
        actual[k] = [s.position for s in state]
        err = q_ref - actual[k]
        if k == 0:
            prev_err = err.copy()
        for i in range(6):
            ax = axes[i]
            if i < 2:
                segments[k, i] = select_segment(err[i], cfg)
                u, integ[i] = segmented_pid_step(err[i], integ[i], prev_err[i], cfg, dt, ax.a_max)
            else:
                u, integ[i] = _pid(err[i], integ[i], prev_err[i], cfg.joint_gains, dt, ax.a_max)
                u += a_ref[i] + ax.damping * v_ref[i]
            command[k, i] = u
            state[i] = plant_step(state[i], u, dt)
            if not math.isfinite(state[i].position):
                raise SimulationError(f"axis {JOINT_NAMES[i]} diverged", k)
        prev_err = err

    target_xyz = fk_positions(target, p)
    actual_xyz = fk_positions(actual, p)
    errors = np.linalg.norm(target_xyz - actual_xyz, axis=1)
    return TrackingReport(
        times,
        target,
        actual,
        command,
        target_xyz,
        actual_xyz,
        segments,
        compute_rmse(target_xyz, actual_xyz),
        float(errors.max()),
        settling_time(times, errors, plant.settle_band),
    )


def write_log(report: TrackingReport, destination) -> Path:
    """Long-format tracking log: one row per tick and axis."""
    path = Path(destination)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for k, t in enumerate(report.t):
            for i, name in enumerate(JOINT_NAMES):
                writer.writerow(
                    [repr(float(t)), name, repr(float(report.target[k, i])), repr(float(report.actual[k, i])),
                     repr(float(report.command[k, i]))]
                )
    return path


def read_log(source) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Times plus ``(n, 6)`` target, actual and command arrays from a tracking log."""
    with Path(source).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != LOG_HEADER:
            raise ValueError("unexpected tracking-log header")
        rows = list(reader)
    n = len(rows) // 6
    t = np.array([float(rows[6 * k][0]) for k in range(n)])
    cols = [np.array([float(r[c]) for r in rows]).reshape(n, 6) for c in (2, 3, 4)]
    return t, *cols


def write_summary(report: TrackingReport, destination) -> Path:
    path = Path(destination)
    path.write_text(json.dumps(report.summary(), indent=2) + "\n", encoding="utf-8")
    return path
