"""Forward kinematics of the parallel base, the serial wrist chain and the whole arm.

Frames: ``A`` is fixed at the rail origin, ``C`` is the top platform of the
dual-slider linkage and ``P`` is the tool centre point.
"""

from __future__ import annotations

import math

import numpy as np

from .model import JointState, Pose, StructuralParams


class DomainError(ValueError):
    """The slider separation lies outside the linkage's square-root domain."""


def half_chord(b, p: StructuralParams):
    return (b + p.e3 - p.e2) / 2.0


def platform_height(b: float, p: StructuralParams) -> float:
    """Height of the platform origin above the rail origin (``Zc``)."""
    hc = half_chord(b, p)
    rad = p.d1 * p.d1 - hc * hc
    if rad < 0.0:
        if rad > -1e-9 * p.d1 * p.d1:
            rad = 0.0
        else:
            raise DomainError(f"b={b!r} outside the linkage domain (|half chord| > d1)")
    return math.sqrt(rad) + p.h + p.e1


def platform_x(a: float, b: float, p: StructuralParams) -> float:
    return p.e3 / 2.0 + a + half_chord(b, p)


def separation_for_height(zc: float, p: StructuralParams) -> float:
    """Inverse of :func:`platform_height` on the splitting branch (``b >= e2 - e3``)."""
    rise = zc - p.h - p.e1
    rad = p.d1 * p.d1 - rise * rise
    if rise < -1e-9 or rad < -1e-9:
        raise DomainError(f"platform height {zc!r} outside [{p.h + p.e1}, {p.d1 + p.h + p.e1}]")
    return 2.0 * math.sqrt(max(rad, 0.0)) - p.e3 + p.e2


def parallel_fk(a: float, b: float, p: StructuralParams) -> Pose:
    """Pose of the platform frame C in the rail frame A. The platform never rotates."""
    return Pose(np.eye(3), np.array([platform_x(a, b, p), p.e4, platform_height(b, p)]))


def link_transforms(t1: float, t2: float, t3: float, t4: float, p: StructuralParams) -> list[np.ndarray]:
    """The four homogeneous link matrices of the wrist chain, C -> 1 -> 2 -> 3 -> P."""
    c1, s1 = math.cos(t1), math.sin(t1)
    c2, s2 = math.cos(t2), math.sin(t2)
    c3, s3 = math.cos(t3), math.sin(t3)
    c4, s4 = math.cos(t4), math.sin(t4)
    t01 = np.array([[c1, -s1, 0, 0], [s1, c1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)
    t12 = np.array([[c2, -s2, 0, c2 * p.d2], [s2, c2, 0, s2 * p.d2], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)
    t23 = np.array([[c3, 0, s3, c3 * p.d3], [s3, 0, -c3, s3 * p.d3], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float)
    t34 = np.array([[c4, 0, s4, 0], [s4, 0, -c4, 0], [0, 1, 0, p.d4], [0, 0, 0, 1]], dtype=float)
    return [t01, t12, t23, t34]


def serial_fk(t1: float, t2: float, t3: float, t4: float, p: StructuralParams) -> Pose:
    """Pose of the TCP frame P in the platform frame C."""
    m = np.eye(4)
    for t in link_transforms(t1, t2, t3, t4, p):
        m = m @ t
    return Pose.from_matrix(m)


def full_fk(q: JointState, p: StructuralParams) -> Pose:
    return parallel_fk(q.a, q.b, p) @ serial_fk(q.theta1, q.theta2, q.theta3, q.theta4, p)


def body_height(q: JointState, p: StructuralParams) -> float:
    """Top of the mechanism: platform height plus the serial-stack allowance."""
    return platform_height(q.b, p) + p.stack_height


def min_body_height(p: StructuralParams) -> float:
    return platform_height(p.b_max, p) + p.stack_height


def distal_reach(p: StructuralParams) -> float:
    """Distance from joint 2 to the TCP; independent of theta3 because the d4 offset is perpendicular."""
    return math.hypot(p.d3, p.d4)


def distal_phase(theta3, p: StructuralParams):
    """Angle of the joint-2 -> TCP vector in link-2 coordinates."""
    return theta3 - math.atan2(p.d4, p.d3)


def fk_positions(states: np.ndarray, p: StructuralParams) -> np.ndarray:
    """TCP positions in frame A for an ``(n, 6)`` array of joint states.

    Closed-form expansion of the same matrix product as :func:`full_fk`,
    used where thousands of states are evaluated at once.
    """
    s = np.atleast_2d(np.asarray(states, dtype=float))
    a, b, t1, t2, t3 = s[:, 0], s[:, 1], s[:, 2], s[:, 3], s[:, 4]
    hc = half_chord(b, p)
    rad = p.d1 * p.d1 - hc * hc
    if np.any(rad < -1e-9 * p.d1 * p.d1):
        raise DomainError("separation outside the linkage domain")
    zc = np.sqrt(np.maximum(rad, 0.0)) + p.h + p.e1
    xc = p.e3 / 2.0 + a + hc
    u = p.d3 * np.cos(t3) + p.d4 * np.sin(t3)
    w = p.d3 * np.sin(t3) - p.d4 * np.cos(t3)
    c2, s2 = np.cos(t2), np.sin(t2)
    vx = c2 * (p.d2 + u) - s2 * w
    vy = s2 * (p.d2 + u) + c2 * w
    c1, s1 = np.cos(t1), np.sin(t1)
    out = np.empty((s.shape[0], 3))
    out[:, 0] = xc + c1 * vx - s1 * vy
    out[:, 1] = p.e4 + s1 * vx + c1 * vy
    out[:, 2] = zc
    return out
