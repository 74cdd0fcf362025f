"""Domain types, structural parameters and the JSON configuration schema.

Lengths are millimetres and angles radians throughout. Every type here is an
immutable value object.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

JOINT_NAMES = ("a", "b", "theta1", "theta2", "theta3", "theta4")
ORTHONORMAL_TOL = 1e-9


class ConfigError(ValueError):
    """The configuration document does not match the schema."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ValidationError(ValueError):
    """A parameter set violates one of its invariants."""

    def __init__(self, constraint: str, message: str | None = None):
        super().__init__(message or constraint)
        self.constraint = constraint


def _default_theta_limits() -> tuple[tuple[float, float], ...]:
    return ((-math.pi, math.pi), (-2.62, 2.62), (-math.pi / 2, math.pi / 2), (-math.pi, math.pi))


@dataclass(frozen=True)
class StructuralParams:
    """Geometry, travel limits and dynamic limits of the arm.

    ``b_max`` and ``stack_height`` default to the largest separation the
    linkage admits (``2*d1 - e3 + e2``) and to ``d2`` respectively.
    """

    d1: float = 393.0
    d2: float = 160.0
    d3: float = 145.0
    d4: float = 118.0
    e1: float = 40.0
    e2: float = 60.0
    e3: float = 60.0
    e4: float = 0.0
    h: float = 50.0
    rail_length: float = 1212.0
    a_min: float = 0.0
    a_max: float = 800.0
    b_min: float = 60.0
    b_max: float | None = None
    carriage: float = 0.0
    stack_height: float | None = None
    theta_limits: tuple[tuple[float, float], ...] = field(default_factory=_default_theta_limits)
    v_max_slider: float = 1500.0
    v_max_joint: float = math.pi
    accel_max: float = 3000.0
    jerk_max: float = 30000.0

    def __post_init__(self) -> None:
        if self.b_max is None:
            object.__setattr__(self, "b_max", self.sqrt_domain_b)
        if self.stack_height is None:
            object.__setattr__(self, "stack_height", self.d2)
        limits = tuple((float(lo), float(hi)) for lo, hi in self.theta_limits)
        object.__setattr__(self, "theta_limits", limits)
        self._check()

    @property
    def sqrt_domain_b(self) -> float:
        """Largest separation for which the linkage height is defined."""
        return 2.0 * self.d1 - self.e3 + self.e2

    @property
    def apex_b(self) -> float:
        """Separation at which the linkage stands fully upright."""
        return self.e2 - self.e3

    def _check(self) -> None:
        for name in ("d1", "d2", "d3", "d4", "rail_length"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} > 0", f"{name} must be positive")
        if not 0 <= self.a_min < self.a_max:
            raise ValidationError("0 <= a_min < a_max")
        if self.b_min < 0:
            raise ValidationError("b_min >= 0")
        if self.b_min >= self.b_max:
            raise ValidationError("b_min < b_max")
        if self.b_max > self.sqrt_domain_b + 1e-9:
            raise ValidationError("sqrt domain", "b_max exceeds sqrt domain (2*d1 - e3 + e2)")
        if self.b_min < self.apex_b - 2.0 * self.d1:
            raise ValidationError("sqrt domain", "b_min below sqrt domain")
        # both sliders must fit on the rail in at least the most compact state
        if self.a_min + self.b_min + self.carriage > self.rail_length:
            raise ValidationError("rail fit", "a_min + b_min + carriage exceeds rail_length")
        if len(self.theta_limits) != 4:
            raise ValidationError("theta_limits", "exactly four joint ranges required")
        for i, (lo, hi) in enumerate(self.theta_limits, start=1):
            if not lo < hi:
                raise ValidationError(f"theta{i} limits", f"theta{i} min must be below max")
        for name in ("v_max_slider", "v_max_joint", "accel_max", "jerk_max"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} > 0", f"{name} must be positive")
        if self.stack_height < 0 or self.carriage < 0:
            raise ValidationError("non-negative allowances")

    def digest(self) -> str:
        """Stable hash of the parameter set, used in artifact metadata."""
        blob = json.dumps(params_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class JointState:
    a: float
    b: float
    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0
    theta4: float = 0.0

    @property
    def thetas(self) -> tuple[float, float, float, float]:
        return (self.theta1, self.theta2, self.theta3, self.theta4)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, *self.thetas], dtype=float)

    @classmethod
    def from_array(cls, values) -> JointState:
        a, b, t1, t2, t3, t4 = (float(v) for v in values)
        return cls(a, b, t1, t2, t3, t4)

    def replace(self, **changes: float) -> JointState:
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotation (3x3) and translation (mm)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        trans = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(rot.T @ rot, np.eye(3), rtol=0, atol=ORTHONORMAL_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not proper (det != +1)")
        rot.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> Pose:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> Pose:
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def flat(self) -> list[float]:
        """Rotation row-major followed by translation (12 numbers)."""
        return [float(v) for v in self.rotation.ravel()] + [float(v) for v in self.translation]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __repr__(self) -> str:
        return f"Pose(translation={self.translation.tolist()}, rotation={self.rotation.tolist()})"


class Frame(Enum):
    WORLD = "world"  # rail origin
    BASE = "base"  # top platform of the parallel linkage


@dataclass(frozen=True)
class TargetSpec:
    """TCP position target with commanded wrist angles.

    ``theta3=None`` leaves the elbow free for the inverse-kinematics sweep.
    """

    position: tuple[float, float, float]
    theta3: float | None = 0.0
    theta4: float = 0.0
    frame: Frame = Frame.WORLD

    def __post_init__(self) -> None:
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError("target position must be three finite numbers")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float


def _default_gains() -> tuple[PidGains, ...]:
    # near (docking), mid, far: stiffest close to the target
    return (PidGains(400.0, 1500.0, 40.0), PidGains(300.0, 1000.0, 35.0), PidGains(150.0, 200.0, 25.0))


def _default_scurve() -> dict[str, tuple[float, float, float]]:
    return {
        "slider": (1500.0, 3000.0, 30000.0),
        "joint": (math.pi, 10.0, 100.0),
        "line": (150.0, 300.0, 1500.0),
    }


@dataclass(frozen=True)
class ControllerConfig:
    """Segmented PID gains, loop rate and S-curve limits.

    ``segment_bounds`` are upper bounds on ``|error|`` (mm); an error equal
    to a bound belongs to the lower segment and errors past the last bound use
    the last segment.
    """

    segment_bounds: tuple[float, ...] = (10.0, 500.0, 1212.0)
    gains: tuple[PidGains, ...] = field(default_factory=_default_gains)
    joint_gains: PidGains = PidGains(400.0, 1500.0, 40.0)
    loop_rate: float = 60.0
    scurve: Mapping[str, tuple[float, float, float]] = field(default_factory=_default_scurve)

    def __post_init__(self) -> None:
        bounds = tuple(float(b) for b in self.segment_bounds)
        object.__setattr__(self, "segment_bounds", bounds)
        object.__setattr__(self, "gains", tuple(self.gains))
        if not bounds or any(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValidationError("segment bounds", "segment breakpoints must be strictly increasing")
        if len(self.gains) != len(bounds):
            raise ValidationError("gains", "one gain set per segment required")
        if not self.loop_rate > 0:
            raise ValidationError("loop_rate > 0")
        for g in (*self.gains, self.joint_gains):
            if min(g.kp, g.ki, g.kd) < 0:
                raise ValidationError("gains >= 0", "PID gains must be non-negative")
        for name, lim in self.scurve.items():
            if len(lim) != 3 or min(lim) <= 0:
                raise ValidationError(f"scurve.{name}", "S-curve limits must be three positive numbers")

    @property
    def dt(self) -> float:
        return 1.0 / self.loop_rate


# --- configuration document -------------------------------------------------

_SCHEMA: dict[str, dict[str, str]] = {
    "links": {"d1": "d1", "d2": "d2", "d3": "d3", "d4": "d4"},
    "offsets": {"e1": "e1", "e2": "e2", "e3": "e3", "e4": "e4", "h": "h", "stack": "stack_height"},
    "rail": {
        "length": "rail_length",
        "a_min": "a_min",
        "a_max": "a_max",
        "b_min": "b_min",
        "b_max": "b_max",
        "carriage": "carriage",
    },
    "limits": {"v_slider": "v_max_slider", "v_joint": "v_max_joint", "accel": "accel_max", "jerk": "jerk_max"},
}
_TOP_LEVEL = set(_SCHEMA) | {"joints", "controller", "plant"}


def _read_document(source: Any) -> Mapping[str, Any]:
    if isinstance(source, Mapping):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(str(source), f"cannot read configuration: {exc}") from exc
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("<document>", "top level must be an object")
    return doc


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    return float(value)


def _section(doc: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    sec = doc.get(name, {})
    if not isinstance(sec, Mapping):
        raise ConfigError(name, "expected an object")
    return sec


def load_params(source: Any) -> StructuralParams:
    """Build validated :class:`StructuralParams` from a configuration document.

    ``source`` may be a mapping, a JSON string or a path to a JSON file.
    Omitted fields take the dataclass defaults.
    """
    doc = _read_document(source)
    unknown = set(doc) - _TOP_LEVEL
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    kwargs: dict[str, Any] = {}
    for sec_name, mapping in _SCHEMA.items():
        sec = _section(doc, sec_name)
        for key, value in sec.items():
            if key not in mapping:
                raise ConfigError(f"{sec_name}.{key}", "unknown key")
            kwargs[mapping[key]] = _number(value, f"{sec_name}.{key}")
    joints = _section(doc, "joints")
    if joints:
        limits = list(_default_theta_limits())
        for key, value in joints.items():
            if key not in ("theta1", "theta2", "theta3", "theta4"):
                raise ConfigError(f"joints.{key}", "unknown joint")
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ConfigError(f"joints.{key}", "expected [lo, hi]")
            limits[int(key[-1]) - 1] = (_number(value[0], f"joints.{key}[0]"), _number(value[1], f"joints.{key}[1]"))
        kwargs["theta_limits"] = tuple(limits)
    return StructuralParams(**kwargs)


def params_to_dict(p: StructuralParams) -> dict[str, Any]:
    """Serialize to the configuration schema; inverse of :func:`load_params`."""
    doc: dict[str, Any] = {}
    for sec_name, mapping in _SCHEMA.items():
        doc[sec_name] = {key: getattr(p, attr) for key, attr in mapping.items()}
    doc["joints"] = {f"theta{i}": [lo, hi] for i, (lo, hi) in enumerate(p.theta_limits, start=1)}
    return doc


def _gains(value: Any, where: str) -> PidGains:
    if not isinstance(value, Mapping) or set(value) - {"kp", "ki", "kd"}:
        raise ConfigError(where, "expected {kp, ki, kd}")
    try:
        return PidGains(*(_number(value[k], f"{where}.{k}") for k in ("kp", "ki", "kd")))
    except KeyError as exc:
        raise ConfigError(f"{where}.{exc.args[0]}", "missing gain") from None


def load_controller(source: Any) -> ControllerConfig:
    """Read the ``controller`` section of a configuration document."""
    doc = _read_document(source)
    sec = _section(doc, "controller")
    allowed = {"segments", "gains", "joint_gains", "loop_rate", "scurve"}
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"controller.{key}", "unknown key")
    kwargs: dict[str, Any] = {}
    if "segments" in sec:
        kwargs["segment_bounds"] = tuple(_number(v, "controller.segments") for v in sec["segments"])
    if "gains" in sec:
        kwargs["gains"] = tuple(_gains(g, f"controller.gains[{i}]") for i, g in enumerate(sec["gains"]))
    if "joint_gains" in sec:
        kwargs["joint_gains"] = _gains(sec["joint_gains"], "controller.joint_gains")
    if "loop_rate" in sec:
        kwargs["loop_rate"] = _number(sec["loop_rate"], "controller.loop_rate")
    if "scurve" in sec:
        scurve = dict(_default_scurve())
        for name, lim in sec["scurve"].items():
            scurve[name] = tuple(_number(v, f"controller.scurve.{name}") for v in lim)
        kwargs["scurve"] = scurve
    return ControllerConfig(**kwargs)


def controller_to_dict(cfg: ControllerConfig) -> dict[str, Any]:
    as_dict = lambda g: {"kp": g.kp, "ki": g.ki, "kd": g.kd}  # noqa: E731
    return {
        "segments": list(cfg.segment_bounds),
        "gains": [as_dict(g) for g in cfg.gains],
        "joint_gains": as_dict(cfg.joint_gains),
        "loop_rate": cfg.loop_rate,
        "scurve": {k: list(v) for k, v in cfg.scurve.items()},
    }


# --- state validity -----------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    violations: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid


_ABS_TOL = 1e-9


def validate_state(q: JointState, p: StructuralParams) -> Verdict:
    """Check every joint-state invariant; never raises."""
    out: list[str] = []
    values = q.as_array()
    if not np.all(np.isfinite(values)):
        return Verdict(("non-finite value",))
    if not p.a_min - _ABS_TOL <= q.a <= p.a_max + _ABS_TOL:
        out.append("a limit")
    if not p.b_min - _ABS_TOL <= q.b <= p.b_max + _ABS_TOL:
        out.append("b limit")
    half = (q.b + p.e3 - p.e2) / 2.0
    if abs(half) > p.d1 + _ABS_TOL:
        out.append("sqrt domain")
    if q.a + q.b + p.carriage > p.rail_length + _ABS_TOL:
        out.append("rail fit")
    for i, (theta, (lo, hi)) in enumerate(zip(q.thetas, p.theta_limits), start=1):
        if not lo - _ABS_TOL <= theta <= hi + _ABS_TOL:
            out.append(f"theta{i} limit")
    return Verdict(tuple(out))


def valid_mask(states: np.ndarray, p: StructuralParams) -> np.ndarray:
    """Vectorised :func:`validate_state` over an ``(n, 6)`` array."""
    s = np.asarray(states, dtype=float)
    a, b = s[:, 0], s[:, 1]
    ok = np.all(np.isfinite(s), axis=1)
    ok &= (a >= p.a_min - _ABS_TOL) & (a <= p.a_max + _ABS_TOL)
    ok &= (b >= p.b_min - _ABS_TOL) & (b <= p.b_max + _ABS_TOL)
    ok &= np.abs((b + p.e3 - p.e2) / 2.0) <= p.d1 + _ABS_TOL
    ok &= a + b + p.carriage <= p.rail_length + _ABS_TOL
    for i, (lo, hi) in enumerate(p.theta_limits):
        ok &= (s[:, 2 + i] >= lo - _ABS_TOL) & (s[:, 2 + i] <= hi + _ABS_TOL)
    return ok


def param_fields() -> list[str]:
    return [f.name for f in fields(StructuralParams)]
