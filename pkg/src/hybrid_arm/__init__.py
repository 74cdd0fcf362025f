"""Kinematics, planning and control simulation for a single-rail dual-slider hybrid arm."""

from .model import (
    ConfigError,
    ControllerConfig,
    Frame,
    JointState,
    PidGains,
    Pose,
    StructuralParams,
    TargetSpec,
    ValidationError,
    load_controller,
    load_params,
    params_to_dict,
    validate_state,
)
from .kinematics import body_height, full_fk, parallel_fk, serial_fk
from .ik import IkCandidate, IkError, select_solution, solve_full, solve_parallel, solve_serial

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ControllerConfig",
    "Frame",
    "IkCandidate",
    "IkError",
    "JointState",
    "PidGains",
    "Pose",
    "StructuralParams",
    "TargetSpec",
    "ValidationError",
    "body_height",
    "full_fk",
    "load_controller",
    "load_params",
    "params_to_dict",
    "parallel_fk",
    "select_solution",
    "serial_fk",
    "solve_full",
    "solve_parallel",
    "solve_serial",
    "validate_state",
]
