"""Analytic inverse kinematics.

In the wrist chain joints 1 and 2 share an axis through the platform origin,
so the planar TCP offset is ``Rz(theta1 + theta2) @ v(theta3)`` with
``v(theta3) = (d2, 0) + Rz(theta3) @ (d3, -d4)``. Joint 3 therefore acts as
the elbow and only the sum ``theta1 + theta2`` (the shoulder heading) is
observable. The split between the two is a convention: joint 2 is held at a
reference value and joint 1 takes the rest.

Two solve modes share :func:`solve_full`:

* commanded elbow (``TargetSpec.theta3`` set): the planar radius is fixed,
  so the slider position has at most two exact solutions;
* free elbow (``TargetSpec.theta3 is None``): slider ``a`` is swept over a
  grid and the elbow is solved per grid point by the law of cosines.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .kinematics import (
    DomainError,
    distal_reach,
    fk_positions,
    half_chord,
    platform_height,
    separation_for_height,
)
from .model import Frame, JointState, StructuralParams, TargetSpec, valid_mask, validate_state

DEFAULT_SWEEP = (0.0, 800.0, 1.0)
RESIDUAL_TOL = 1e-6  # mm
CLAMP_BAND = 1e-9


class Branch(Enum):
    ELBOW_UP = "elbow_up"
    ELBOW_DOWN = "elbow_down"


class IkError(ValueError):
    """No admissible joint solution; ``reason`` is a short machine-readable code."""

    def __init__(self, reason: str, message: str | None = None):
        super().__init__(message or reason)
        self.reason = reason


@dataclass(frozen=True)
class IkCandidate:
    state: JointState
    branch: Branch
    position_error: float


class Solutions(list):
    """A list of solutions that also carries a tally of failure reasons."""

    def __init__(self, items=(), reasons: Counter | None = None):
        super().__init__(items)
        self.reasons = reasons if reasons is not None else Counter()

    def dominant_reason(self) -> str | None:
        return self.reasons.most_common(1)[0][0] if self.reasons else None


def wrap_angle(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    y = np.where(y == -math.pi, math.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def elbow_offset(p: StructuralParams) -> float:
    """theta3 at which the wrist chain is fully stretched."""
    return math.atan2(p.d4, p.d3)


def branch_of(theta3: float, p: StructuralParams) -> Branch:
    return Branch.ELBOW_UP if theta3 - elbow_offset(p) >= 0.0 else Branch.ELBOW_DOWN


def distal_vector(theta3: float, p: StructuralParams) -> tuple[float, float]:
    """Planar TCP offset from the platform origin with zero shoulder heading."""
    c3, s3 = math.cos(theta3), math.sin(theta3)
    return p.d2 + p.d3 * c3 + p.d4 * s3, p.d3 * s3 - p.d4 * c3


def split_shoulder(heading: float, p: StructuralParams, theta2_ref: float = 0.0) -> tuple[float, float] | None:
    """Distribute a shoulder heading over the two coaxial joints, or None if no split fits the limits."""
    (lo1, hi1), (lo2, hi2) = p.theta_limits[0], p.theta_limits[1]
    t2 = min(max(theta2_ref, lo2), hi2)
    t1 = wrap_angle(heading - t2)
    if lo1 <= t1 <= hi1:
        return t1, t2
    t1 = min(max(t1, lo1), hi1)
    t2 = wrap_angle(heading - t1)
    if lo2 <= t2 <= hi2:
        return t1, t2
    return None


def _split_many(heading: np.ndarray, p: StructuralParams, theta2_ref: float):
    """Vectorised :func:`split_shoulder`; returns theta1, theta2 and a feasibility mask."""
    (lo1, hi1), (lo2, hi2) = p.theta_limits[0], p.theta_limits[1]
    t2 = np.full_like(heading, min(max(theta2_ref, lo2), hi2))
    t1 = wrap_angle(heading - t2)
    first = (t1 >= lo1) & (t1 <= hi1)
    t1_alt = np.clip(t1, lo1, hi1)
    t2_alt = wrap_angle(heading - t1_alt)
    second = (t2_alt >= lo2) & (t2_alt <= hi2)
    return np.where(first, t1, t1_alt), np.where(first, t2, t2_alt), first | second


def solve_serial(
    x: float, y: float, theta3: float, p: StructuralParams, theta2_ref: float = 0.0
) -> list[tuple[float, float]]:
    """Joint 1/2 angles placing the TCP at ``(x, y)`` in the platform frame for a commanded elbow.

    The reachable set for fixed ``theta3`` is a circle, so the result holds at
    most one pair. Radii within a relative band of 1e-9 of the circle are
    accepted.
    """
    vx, vy = distal_vector(theta3, p)
    rho = math.hypot(vx, vy)
    r = math.hypot(x, y)
    if abs(r / rho - 1.0) > CLAMP_BAND:
        return []
    heading = math.atan2(y, x) - math.atan2(vy, vx)
    pair = split_shoulder(heading, p, theta2_ref)
    return [pair] if pair is not None else []


@dataclass(frozen=True)
class PlanarSolution:
    heading: float  # theta1 + theta2
    theta3: float
    branch: Branch


def _law_of_cosines(x, y, p: StructuralParams):
    """Elbow cosine and the angle between the first link and the target ray."""
    length = distal_reach(p)
    r2 = x * x + y * y
    r = np.sqrt(r2)
    c_elbow = (r2 - p.d2 * p.d2 - length * length) / (2.0 * p.d2 * length)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_phi = (length * length - r2 - p.d2 * p.d2) / (-2.0 * p.d2 * r)
    return c_elbow, cos_phi


def _clamp_unit(c):
    """Clamp cosines within the tolerance band; NaN outside it."""
    c = np.asarray(c, dtype=float)
    ok = np.abs(c) <= 1.0 + CLAMP_BAND
    return np.where(ok, np.clip(c, -1.0, 1.0), np.nan)


def solve_planar(x: float, y: float, p: StructuralParams) -> list[PlanarSolution]:
    """Shoulder heading and elbow for a free elbow: 0, 1 or 2 solutions before limit filtering."""
    c_elbow, cos_phi = _law_of_cosines(x, y, p)
    c_elbow = float(_clamp_unit(c_elbow))
    cos_phi = float(_clamp_unit(cos_phi))
    if math.isnan(c_elbow) or math.isnan(cos_phi):
        return []
    bearing = math.atan2(y, x)
    elbow = math.acos(c_elbow)
    phi = math.acos(cos_phi)
    beta = elbow_offset(p)
    up = PlanarSolution(wrap_angle(bearing - phi), beta + elbow, Branch.ELBOW_UP)
    if elbow == 0.0 or elbow == math.pi:
        return [up]
    down = PlanarSolution(wrap_angle(bearing + phi), beta - elbow, Branch.ELBOW_DOWN)
    return [up, down]


def solve_parallel(x_platform: float, z_platform: float, p: StructuralParams) -> tuple[float, float]:
    """Slider position and separation that put the platform origin at ``(x, z)``."""
    try:
        b = separation_for_height(z_platform, p)
    except DomainError as exc:
        raise IkError("z unreachable", str(exc)) from None
    if not p.b_min - 1e-9 <= b <= p.b_max + 1e-9:
        raise IkError("b limit", f"separation {b:.6f} outside [{p.b_min}, {p.b_max}]")
    a = x_platform - p.e3 / 2.0 - half_chord(b, p)
    if not p.a_min - 1e-9 <= a <= p.a_max + 1e-9:
        raise IkError("a limit", f"slider position {a:.6f} outside [{p.a_min}, {p.a_max}]")
    return a, b


def _separation(z: float, p: StructuralParams, reasons: Counter, weight: int) -> float | None:
    try:
        b = separation_for_height(z, p)
    except DomainError:
        reasons["z unreachable"] += weight
        return None
    if not p.b_min - 1e-9 <= b <= p.b_max + 1e-9:
        reasons["b limit"] += weight
        return None
    return b


def _sweep_grid(sweep: tuple[float, float, float]) -> np.ndarray:
    start, end, step = sweep
    if not (start < end and step > 0):
        raise ValueError("sweep needs start < end and step > 0")
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _finish(
    states: np.ndarray, branches: list[Branch], target: np.ndarray, p: StructuralParams, reasons: Counter
) -> Solutions:
    out = Solutions(reasons=reasons)
    if len(states) == 0:
        _drop_zero(reasons)
        return out
    ok = valid_mask(states, p)
    reasons["joint limit"] += int(np.count_nonzero(~ok))
    err = np.linalg.norm(fk_positions(states, p) - target, axis=1)
    good = ok & (err < RESIDUAL_TOL)
    reasons["residual"] += int(np.count_nonzero(ok & ~good))
    for row, branch, e, keep in zip(states, branches, err, good):
        if keep:
            out.append(IkCandidate(JointState.from_array(row), branch, float(e)))
    out.sort(key=lambda c: c.state.a)
    _drop_zero(reasons)
    return out


def _drop_zero(reasons: Counter) -> None:
    for key in [k for k, v in reasons.items() if v <= 0]:
        del reasons[key]


def _solve_commanded(target, xyz, p, sweep, theta2_ref, reasons) -> Solutions:
    start, end, _ = sweep
    b = _separation(xyz[2], p, reasons, 1)
    if b is None:
        _drop_zero(reasons)
        return Solutions(reasons=reasons)
    x_off = p.e3 / 2.0 + half_chord(b, p)
    y_rel = xyz[1] - p.e4
    vx, vy = distal_vector(target.theta3, p)
    rho = math.hypot(vx, vy)
    if abs(y_rel) > rho * (1.0 + CLAMP_BAND):
        reasons["serial unreachable"] += 1
        return Solutions(reasons=reasons)
    reach = math.sqrt(max(rho * rho - y_rel * y_rel, 0.0))
    roots = {xyz[0] - x_off - reach, xyz[0] - x_off + reach}
    rows, branches = [], []
    for a in sorted(roots):
        if not start - 1e-9 <= a <= end + 1e-9:
            reasons["outside sweep"] += 1
            continue
        if not p.a_min - 1e-9 <= a <= p.a_max + 1e-9:
            reasons["a limit"] += 1
            continue
        pairs = solve_serial(xyz[0] - x_off - a, y_rel, target.theta3, p, theta2_ref)
        if not pairs:
            reasons["joint limit"] += 1
            continue
        t1, t2 = pairs[0]
        rows.append([a, b, t1, t2, target.theta3, target.theta4])
        branches.append(branch_of(target.theta3, p))
    return _finish(np.array(rows).reshape(-1, 6), branches, xyz, p, reasons)


def _solve_swept(target, xyz, p, sweep, theta2_ref, prefer: Branch, reasons) -> Solutions:
    grid = _sweep_grid(sweep)
    b = _separation(xyz[2], p, reasons, len(grid))
    if b is None:
        _drop_zero(reasons)
        return Solutions(reasons=reasons)
    in_travel = (grid >= p.a_min - 1e-9) & (grid <= p.a_max + 1e-9)
    reasons["a limit"] += int(np.count_nonzero(~in_travel))
    grid = grid[in_travel]
    fits = grid + b + p.carriage <= p.rail_length + 1e-9
    reasons["rail fit"] += int(np.count_nonzero(~fits))
    grid = grid[fits]

    x_rel = xyz[0] - p.e3 / 2.0 - half_chord(b, p) - grid
    y_rel = np.full_like(x_rel, xyz[1] - p.e4)
    c_elbow, cos_phi = _law_of_cosines(x_rel, y_rel, p)
    c_elbow, cos_phi = _clamp_unit(c_elbow), _clamp_unit(cos_phi)
    reach = ~(np.isnan(c_elbow) | np.isnan(cos_phi))
    reasons["serial unreachable"] += int(np.count_nonzero(~reach))

    bearing = np.arctan2(y_rel, x_rel)
    elbow = np.arccos(np.where(reach, c_elbow, 1.0))
    phi = np.arccos(np.where(reach, cos_phi, 1.0))
    beta = elbow_offset(p)
    lo3, hi3 = p.theta_limits[2]
    n = len(grid)
    pick = np.full(n, -1)
    theta = np.zeros((n, 3))
    order = (prefer, Branch.ELBOW_DOWN if prefer is Branch.ELBOW_UP else Branch.ELBOW_UP)
    # the preferred branch is taken wherever it fits, the other one elsewhere
    for rank, branch in reversed(list(enumerate(order))):
        sign = 1.0 if branch is Branch.ELBOW_UP else -1.0
        theta3 = beta + sign * elbow
        t1, t2, ok = _split_many(wrap_angle(bearing - sign * phi), p, theta2_ref)
        ok &= reach & (theta3 >= lo3) & (theta3 <= hi3)
        pick = np.where(ok, rank, pick)
        theta = np.where(ok[:, None], np.column_stack([t1, t2, theta3]), theta)
    reasons["joint limit"] += int(np.count_nonzero(reach & (pick < 0)))
    keep = pick >= 0
    rows = np.column_stack(
        [grid[keep], np.full(np.count_nonzero(keep), b), theta[keep], np.full(np.count_nonzero(keep), target.theta4)]
    )
    branches = [order[k] for k in pick[keep]]
    return _finish(rows.reshape(-1, 6), branches, xyz, p, reasons)


def _solve_in_platform(target, p, current, theta2_ref, prefer) -> Solutions:
    reasons: Counter = Counter()
    if current is None:
        raise ValueError("platform-frame targets need the current joint state")
    x, y, z = target.position
    if abs(z) > 1e-9:
        reasons["z unreachable"] += 1
        return Solutions(reasons=reasons)
    rows, branches = [], []
    if target.theta3 is not None:
        for t1, t2 in solve_serial(x, y, target.theta3, p, theta2_ref):
            rows.append([current.a, current.b, t1, t2, target.theta3, target.theta4])
            branches.append(branch_of(target.theta3, p))
    else:
        sols = sorted(solve_planar(x, y, p), key=lambda s: s.branch is not prefer)
        for sol in sols:
            pair = split_shoulder(sol.heading, p, theta2_ref)
            if pair is not None and validate_state(
                JointState(current.a, current.b, *pair, sol.theta3, target.theta4), p
            ):
                rows.append([current.a, current.b, *pair, sol.theta3, target.theta4])
                branches.append(sol.branch)
                break
    if not rows:
        reasons["serial unreachable"] += 1
    platform = np.array([p.e3 / 2.0 + current.a + half_chord(current.b, p), p.e4, platform_height(current.b, p)])
    return _finish(np.array(rows).reshape(-1, 6), branches, platform + np.array([x, y, z]), p, reasons)


def solve_full(
    target: TargetSpec,
    p: StructuralParams,
    sweep: tuple[float, float, float] = DEFAULT_SWEEP,
    current: JointState | None = None,
    prefer: Branch = Branch.ELBOW_UP,
) -> Solutions:
    """All admissible joint states reaching ``target``, ascending in slider position.

    The separation ``b`` follows from the target height alone. With a
    commanded elbow the candidates are the exact slider positions inside the
    sweep interval; with a free elbow (``target.theta3 is None``) one
    candidate is produced per grid point of ``sweep`` where the planar
    sub-problem is solvable, preferring ``prefer`` when both branches fit.
    Joint 2 is held at ``current.theta2`` (or 0) and joint 1 absorbs the
    shoulder heading. The returned list has a ``reasons`` counter of failures.
    """
    if target.theta3 is not None and not (p.theta_limits[2][0] <= target.theta3 <= p.theta_limits[2][1]):
        return Solutions(reasons=Counter({"theta3 limit": 1}))
    if not p.theta_limits[3][0] <= target.theta4 <= p.theta_limits[3][1]:
        return Solutions(reasons=Counter({"theta4 limit": 1}))
    theta2_ref = current.theta2 if current is not None else 0.0
    if target.frame is Frame.BASE:
        return _solve_in_platform(target, p, current, theta2_ref, prefer)
    xyz = np.array(target.position, dtype=float)
    reasons: Counter = Counter()
    if target.theta3 is None:
        return _solve_swept(target, xyz, p, sweep, theta2_ref, prefer, reasons)
    _sweep_grid(sweep)  # validates the interval
    return _solve_commanded(target, xyz, p, sweep, theta2_ref, reasons)


def default_weights(p: StructuralParams) -> tuple[float, ...]:
    # angles are scaled by d2 to be commensurate with millimetres
    return (1.0, 1.0, p.d2, p.d2, p.d2, p.d2)


def select_solution(
    candidates: list[IkCandidate],
    current: JointState,
    weights: tuple[float, ...] | None = None,
    p: StructuralParams | None = None,
) -> IkCandidate:
    """Candidate with the smallest weighted joint displacement from ``current``.

    Ties go to the smaller slider position, then to the elbow-up branch.
    """
    if not candidates:
        raise IkError("no solution", "no candidate to select from")
    if weights is None:
        weights = default_weights(p) if p is not None else (1.0,) * 6
    if len(weights) != 6 or min(weights) < 0:
        raise ValueError("weights must be six non-negative numbers")
    w = np.asarray(weights, dtype=float)
    ref = current.as_array()

    def key(c: IkCandidate):
        cost = float(np.sum(w * np.abs(c.state.as_array() - ref)))
        return (cost, c.state.a, c.branch is not Branch.ELBOW_UP)

    return min(candidates, key=key)
