"""Command-line entry point: ``hybrid-arm <subcommand> ...``.

Exit status is 0 on success, 1 when the arm cannot do what was asked
(unreachable target, infeasible maneuver, diverging simulation) and 2 for
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .ik import IkError, select_solution, solve_full
from .kinematics import full_fk
from .model import (
    ConfigError,
    ControllerConfig,
    JointState,
    StructuralParams,
    TargetSpec,
    ValidationError,
    load_controller,
    load_params,
)
from .motion import (
    PlanningError,
    interpolate_line,
    plan_duck_under,
    plan_pose_hold,
    plan_reorient,
    read_trajectory,
    write_trajectory,
)
from .simctl import AxisLimits, PlantParams, SimulationError, run_tracking, write_log, write_summary
from .workspace import envelope, export_cloud, sample_workspace, voxel_volume


class UsageError(Exception):
    pass


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected {n} comma-separated numbers") from None
    if len(values) != n:
        raise UsageError(f"{what}: expected {n} values, got {len(values)}")
    return values


def _angle(value: float | None, deg: bool) -> float | None:
    if value is None:
        return None
    return math.radians(value) if deg else value


def _state(text: str, deg: bool) -> JointState:
    a, b, *thetas = _floats(text, 6, "state")
    return JointState(a, b, *(_angle(t, deg) for t in thetas))


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


# --- configuration --------------------------------------------------------------


def _apply_override(doc: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise UsageError(f"--set expects section.key=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        raise UsageError(f"--set {key}: value must be JSON") from None
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot override inside a non-object")
    node[parts[-1]] = value


def load_bundle(args) -> tuple[StructuralParams, ControllerConfig, PlantParams]:
    doc: dict = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(args.config, f"cannot read configuration: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(args.config, f"invalid JSON: {exc}") from None
    for assignment in args.set or ():
        _apply_override(doc, assignment)
    return load_params(doc), load_controller(doc), load_plant(doc)


def load_plant(doc: dict) -> PlantParams:
    sec = doc.get("plant", {})
    if not isinstance(sec, dict):
        raise ConfigError("plant", "expected an object")
    base = PlantParams()
    kwargs = {}
    for name in ("slider", "joint"):
        if name in sec:
            spec = sec[name]
            unknown = set(spec) - {"v_max", "a_max", "damping"}
            if unknown:
                raise ConfigError(f"plant.{name}.{sorted(unknown)[0]}", "unknown key")
            current = getattr(base, name)
            kwargs[name] = AxisLimits(
                float(spec.get("v_max", current.v_max)),
                float(spec.get("a_max", current.a_max)),
                float(spec.get("damping", current.damping)),
            )
    for name in ("hold_time", "settle_band"):
        if name in sec:
            kwargs[name] = float(sec[name])
    unknown = set(sec) - {"slider", "joint", "hold_time", "settle_band"}
    if unknown:
        raise ConfigError(f"plant.{sorted(unknown)[0]}", "unknown key")
    return PlantParams(**kwargs)


# --- subcommands ------------------------------------------------------------------


def cmd_fk(args, out) -> int:
    p, _, _ = load_bundle(args)
    pose = full_fk(_state(args.state, args.deg), p)
    print(_fmt(pose.flat()), file=out)
    return 0


def _target(position: str, theta3, theta4, deg: bool) -> TargetSpec:
    return TargetSpec(tuple(_floats(position, 3, "target")), _angle(theta3, deg), _angle(theta4, deg) or 0.0)


def cmd_ik(args, out) -> int:
    p, _, _ = load_bundle(args)
    target = _target(args.target, args.theta3, args.theta4, args.deg)
    sweep = tuple(_floats(args.sweep, 3, "sweep")) if args.sweep else (0.0, 800.0, 1.0)
    current = _state(args.current, args.deg) if args.current else None
    try:
        sols = solve_full(target, p, sweep, current=current)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["a_mm", "b_mm", "theta1", "theta2", "theta3", "theta4", "branch", "position_error_mm"])
            for c in sols:
                writer.writerow([*(repr(float(v)) for v in c.state.as_array()), c.branch.value, repr(c.position_error)])
    if not sols:
        raise IkError(sols.dominant_reason() or "unreachable")
    ref = current or JointState(0.5 * (p.a_min + p.a_max), p.b_min)
    print(_fmt(select_solution(sols, ref, p=p).state.as_array()), file=out)
    return 0


def cmd_workspace(args, out) -> int:
    p, _, _ = load_bundle(args)
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    cloud = sample_workspace(p, args.n, args.seed)
    if args.out:
        export_cloud(cloud, args.out)
    env = envelope(cloud)
    summary = {
        "n": cloud.sample_count,
        "seed": args.seed,
        "envelope_mm": env.as_dict(),
        "span_mm": [float(v) for v in env.span],
        "voxel_mm": args.voxel,
        "volume_mm3": voxel_volume(cloud, args.voxel),
    }
    print(json.dumps(summary), file=out)
    return 0


def cmd_plan(args, out) -> int:
    p, cfg, _ = load_bundle(args)
    deg = args.deg
    if args.kind == "line":
        start = _target(args.start, args.theta3, args.theta4, deg)
        end = _target(args.end, args.theta3, args.theta4, deg)
        current = _state(args.current, deg) if args.current else None
        traj = interpolate_line(start, end, args.n, p, current=current, limits=tuple(cfg.scurve["line"]))
    elif args.kind == "duck":
        plan = plan_duck_under(_state(args.state, deg), args.clearance, args.travel_to, p, args.margin, cfg.dt)
        traj = plan.trajectory
        print(json.dumps({"split_b_mm": plan.split_b, "points": len(traj)}), file=out)
    elif args.kind == "hold":
        plan = plan_pose_hold(_state(args.state, deg), args.velocity, args.duration, args.dt or cfg.dt, p)
        traj = plan.trajectory
        print(json.dumps({"t_end_s": plan.t_end, "limit": plan.limit, "points": len(traj)}), file=out)
    else:
        q0 = _state(args.state, deg)
        about = full_fk(q0, p).translation
        traj = plan_reorient(about, q0, _angle(args.theta3, deg), _angle(args.theta4, deg), args.steps, p)
    write_trajectory(traj, args.out)
    return 0


def cmd_simulate(args, out) -> int:
    p, cfg, plant = load_bundle(args)
    plan = read_trajectory(args.traj, p)
    if len(plan) == 0:
        raise UsageError("trajectory file holds no points")
    report = run_tracking(plan, cfg, plant, p)
    write_log(report, args.out)
    if args.summary:
        write_summary(report, args.summary)
    print(json.dumps(report.summary()), file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=JSON", help="override a configuration field")
    common.add_argument("--deg", action="store_true", help="angles on the command line are in degrees")

    parser = argparse.ArgumentParser(prog="hybrid-arm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    fk = sub.add_parser("fk", parents=[common], help="forward kinematics")
    fk.add_argument("--state", required=True, help="a,b,theta1,theta2,theta3,theta4")
    fk.set_defaults(func=cmd_fk)

    ik = sub.add_parser("ik", parents=[common], help="inverse kinematics")
    ik.add_argument("--target", required=True, help="x,y,z in mm")
    ik.add_argument("--theta3", type=float, help="commanded elbow; omit to sweep the slider")
    ik.add_argument("--theta4", type=float, default=0.0)
    ik.add_argument("--sweep", help="start,end,step in mm")
    ik.add_argument("--current", help="state used to pick the nearest solution")
    ik.add_argument("--out", help="candidate list CSV")
    ik.set_defaults(func=cmd_ik)

    ws = sub.add_parser("workspace", parents=[common], help="Monte Carlo workspace")
    ws.add_argument("--n", type=int, required=True)
    ws.add_argument("--seed", type=int, default=0)
    ws.add_argument("--voxel", type=float, default=10.0)
    ws.add_argument("--out", help="point cloud CSV")
    ws.set_defaults(func=cmd_workspace)

    plan = sub.add_parser("plan", help="trajectory planners")
    kinds = plan.add_subparsers(dest="kind", required=True)
    line = kinds.add_parser("line", parents=[common])
    line.add_argument("--start", required=True)
    line.add_argument("--end", required=True)
    line.add_argument("--theta3", type=float, default=0.0)
    line.add_argument("--free-elbow", dest="theta3", action="store_const", const=None)
    line.add_argument("--theta4", type=float, default=0.0)
    line.add_argument("--n", type=int, default=10)
    line.add_argument("--current")
    duck = kinds.add_parser("duck", parents=[common])
    duck.add_argument("--state", required=True)
    duck.add_argument("--clearance", type=float, required=True)
    duck.add_argument("--travel-to", type=float, required=True)
    duck.add_argument("--margin", type=float, default=10.0)
    hold = kinds.add_parser("hold", parents=[common])
    hold.add_argument("--state", required=True)
    hold.add_argument("--velocity", type=float, required=True)
    hold.add_argument("--duration", type=float, required=True)
    hold.add_argument("--dt", type=float)
    reo = kinds.add_parser("reorient", parents=[common])
    reo.add_argument("--state", required=True)
    reo.add_argument("--theta3", type=float, required=True)
    reo.add_argument("--theta4", type=float, required=True)
    reo.add_argument("--steps", type=int, default=10)
    for kp in (line, duck, hold, reo):
        kp.add_argument("--out", required=True, help="trajectory CSV")
    plan.set_defaults(func=cmd_plan)

    sim = sub.add_parser("simulate", parents=[common], help="closed-loop tracking simulation")
    sim.add_argument("--traj", required=True)
    sim.add_argument("--out", required=True, help="tracking log CSV")
    sim.add_argument("--summary", help="summary JSON")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (IkError, PlanningError, SimulationError) as exc:
        reason = getattr(exc, "reason", None) or str(exc)
        print(f"error: {reason}", file=sys.stderr)
        return 1
    except (UsageError, ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
