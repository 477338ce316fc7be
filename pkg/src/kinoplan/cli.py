"""Command-line entry points.

Exit codes: 0 success, 1 runtime error, 2 infeasible instance, 64 usage.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import InfeasibleRequestError, KinoplanError
from .evaluation import (
    aggregate,
    constraint_error,
    path_length_excess,
    read_limit_sets_csv,
    read_scenarios_csv,
    run_batch,
    write_aggregates_csv,
    write_results_csv,
)
from .kinematics import (
    DEFAULT_LIMITS,
    KinodynamicLimits,
    build_transition_table,
    table_from_bytes,
    table_to_bytes,
    write_table_csv,
)
from .mesh import content_hash, nearest_vertex, parse_mesh
from .model import PlanRequest, build_model
from .model_io import export_model
from .oracle import oracle_best, write_paths_csv
from .solver import SolveOptions, SolveStatus, solve_milp
from .trajectory import (
    extract_path,
    to_json,
    write_acceleration_csv,
    write_velocity_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64

LIMITS_ENV_VAR = "KINOPLAN_LIMITS"

_LIMIT_FLAGS = (
    "theta_max_yaw", "theta_max_pitch", "phi_max", "a_max", "v_max",
    "v_min", "kappa", "gamma", "s_upper",
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; map that onto the dedicated usage code
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_limit_flags(parser):
    parser.add_argument("--limits", metavar="FILE",
                        help="key=value limits file (flags below override it)")
    for name in _LIMIT_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", type=float,
                            default=None, dest=name)


def _add_solver_flags(parser):
    parser.add_argument("--gap-tol", type=float, default=1e-6)
    parser.add_argument("--node-limit", type=int, default=0)
    parser.add_argument("--time-limit", type=float, default=0.0)


def _read_limits_file(path):
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _LIMIT_FLAGS:
            raise ValueError(f"{path}:{line_no}: unknown limit {key!r}")
        values[key] = float(value.strip())
    return values


def _resolve_limits(args):
    """Defaults, then the limits file (flag or environment), then flags."""
    values = asdict(DEFAULT_LIMITS)
    source = args.limits or os.environ.get(LIMITS_ENV_VAR)
    if source:
        values.update(_read_limits_file(source))
    for name in _LIMIT_FLAGS:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    return KinodynamicLimits(**values)


def _parse_point(text, label):
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"{label} must be x,y,z (got {text!r})")
    return tuple(float(p) for p in parts)


def _options(args):
    return SolveOptions(
        gap_tol=args.gap_tol,
        node_limit=args.node_limit,
        time_limit=args.time_limit,
    )


def _out_dir(args):
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_or_build_table(mesh, limits, cache_path, verbose):
    key = ":".join([
        content_hash(mesh),
        repr(limits.theta_max_yaw),
        repr(limits.theta_max_pitch),
        repr(limits.phi_max),
    ])
    if cache_path and Path(cache_path).exists():
        with np.load(cache_path) as npz:
            if str(npz["key"]) == key:
                if verbose:
                    print(f"transition table: cache hit ({cache_path})",
                          file=sys.stderr)
                return table_from_bytes(npz["blob"].tobytes())
        if verbose:
            print("transition table: cache stale, rebuilding", file=sys.stderr)
    table = build_transition_table(mesh, limits)
    if cache_path:
        blob = np.frombuffer(table_to_bytes(table), dtype=np.uint8)
        buf = io.BytesIO()
        np.savez(buf, key=np.array(key), blob=blob)
        Path(cache_path).write_bytes(buf.getvalue())
        if verbose:
            print(f"transition table: cached to {cache_path}", file=sys.stderr)
    return table


def _snap(mesh, point, label, verbose):
    node = nearest_vertex(mesh, point)
    dist = float(np.linalg.norm(mesh.vertices[node] - np.asarray(point)))
    if verbose:
        print(f"{label}: snapped to vertex {node} ({dist:.6g} away)",
              file=sys.stderr)
    return node


def _cmd_plan(args):
    mesh = parse_mesh(args.mesh)
    limits = _resolve_limits(args)
    out = _out_dir(args)
    table = _load_or_build_table(mesh, limits, args.table_cache, args.verbose)
    start = _snap(mesh, _parse_point(args.start, "--start"), "start", args.verbose)
    goal = _snap(mesh, _parse_point(args.goal, "--goal"), "goal", args.verbose)
    model = build_model(mesh, table, PlanRequest(start, goal, limits))
    if args.verbose:
        print(f"model: {model.n_rows} rows, {model.n_vars} columns",
              file=sys.stderr)
    result = solve_milp(model, _options(args))
    if result.status == SolveStatus.INFEASIBLE:
        print(f"infeasible: no admissible path from vertex {start} to {goal}")
        return EXIT_INFEASIBLE
    if result.status not in (SolveStatus.OPTIMAL, SolveStatus.GAP_LIMIT):
        print(f"solve stopped early: {result.status.value} "
              f"(bound {result.bound:.6g})", file=sys.stderr)
        return EXIT_ERROR
    trajectory = extract_path(mesh, result)
    (out / "trajectory.json").write_text(to_json(trajectory), encoding="utf-8")
    write_velocity_csv(trajectory, out / "velocity_profile.csv")
    write_acceleration_csv(trajectory, out / "acceleration_profile.csv")
    pi = constraint_error(trajectory, limits).total
    try:
        delta = path_length_excess(trajectory.waypoints)
        delta_text = f"{delta:.6g}"
    except ValueError:
        delta_text = "n/a"
    print(f"status: {result.status.value}")
    print(f"path: {' -> '.join(str(n) for n in trajectory.nodes)}")
    print(f"time: model {trajectory.total_time_model:.6g} s, "
          f"physical {trajectory.total_time_physical:.6g} s")
    print(f"constraint error: {pi:.6g} (threshold {args.pi_threshold:.6g})")
    print(f"detour: {delta_text}")
    print(f"wrote: {out / 'trajectory.json'}")
    if pi > args.pi_threshold:
        print("constraint error exceeds threshold", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def _cmd_transitions(args):
    mesh = parse_mesh(args.mesh)
    limits = _resolve_limits(args)
    out = _out_dir(args)
    table = _load_or_build_table(mesh, limits, args.cache, args.verbose)
    write_table_csv(mesh, table, out / "edges.csv", out / "forbidden_pairs.csv")
    admissible = int(table.pitch_ok.sum())
    print(f"edges: {mesh.n_edges} directed, {admissible} admissible")
    print(f"forbidden pairs: {table.n_forbidden}")
    print(f"wrote: {out / 'edges.csv'}, {out / 'forbidden_pairs.csv'}")
    return EXIT_OK


def _cmd_export_model(args):
    mesh = parse_mesh(args.mesh)
    limits = _resolve_limits(args)
    out = _out_dir(args)
    table = build_transition_table(mesh, limits)
    start = _snap(mesh, _parse_point(args.start, "--start"), "start", args.verbose)
    goal = _snap(mesh, _parse_point(args.goal, "--goal"), "goal", args.verbose)
    model = build_model(mesh, table, PlanRequest(start, goal, limits))
    fmt = args.format
    target = out / f"model.{fmt}"
    target.write_text(export_model(model, fmt), encoding="utf-8")
    print(f"model: {model.n_rows} rows, {model.n_vars} columns")
    print(f"wrote: {target}")
    return EXIT_OK


def _cmd_eval(args):
    scenarios = read_scenarios_csv(args.scenarios)
    sets = read_limit_sets_csv(args.sets)
    out = _out_dir(args)
    rows = run_batch(scenarios, sets, solve_options=SolveOptions(
        gap_tol=args.gap_tol, node_limit=args.node_limit,
        time_limit=args.time_limit,
    ))
    write_results_csv(rows, out / "results.csv")
    write_aggregates_csv(aggregate(rows), out / "aggregates.csv")
    solved = sum(1 for r in rows if r["pi"] is not None)
    print(f"rows: {len(rows)} ({solved} solved)")
    print(f"wrote: {out / 'results.csv'}, {out / 'aggregates.csv'}")
    return EXIT_OK


def _cmd_oracle(args):
    mesh = parse_mesh(args.mesh)
    limits = _resolve_limits(args)
    out = _out_dir(args)
    table = build_transition_table(mesh, limits)
    start = _snap(mesh, _parse_point(args.start, "--start"), "start", args.verbose)
    goal = _snap(mesh, _parse_point(args.goal, "--goal"), "goal", args.verbose)
    reference = oracle_best(mesh, table, start, goal, limits,
                            k=args.grid, max_nodes=args.max_nodes)
    write_paths_csv(reference, out / "oracle_paths.csv")
    report = {
        "start": start,
        "goal": goal,
        "paths_enumerated": len(reference.paths),
        "oracle_time": None if reference.best_index < 0 else reference.best_time,
        "oracle_path": reference.best_path,
        "grid_points": reference.k,
    }
    planner_time = None
    try:
        model = build_model(mesh, table, PlanRequest(start, goal, limits))
        result = solve_milp(model, _options(args))
    except InfeasibleRequestError:
        result = None
    if result is not None and result.status in (SolveStatus.OPTIMAL,
                                                SolveStatus.GAP_LIMIT):
        trajectory = extract_path(mesh, result)
        planner_time = trajectory.total_time_model
        report["planner_status"] = result.status.value
        report["planner_time_model"] = trajectory.total_time_model
        report["planner_time_physical"] = trajectory.total_time_physical
        report["planner_path"] = [int(n) for n in trajectory.nodes]
    else:
        report["planner_status"] = (
            "infeasible" if result is None else result.status.value
        )
    (out / "oracle_report.json").write_text(
        json.dumps(report, indent=2), encoding="utf-8"
    )
    print(f"paths enumerated: {len(reference.paths)}")
    if reference.best_index >= 0:
        print(f"oracle best: {reference.best_time:.6g} s on "
              f"{'-'.join(str(n) for n in reference.best_path)}")
    else:
        print("oracle best: none feasible")
    if planner_time is not None:
        print(f"planner: {planner_time:.6g} s (model time), "
              f"status {report['planner_status']}")
    else:
        print(f"planner: no trajectory ({report['planner_status']})")
    print(f"wrote: {out / 'oracle_paths.csv'}, {out / 'oracle_report.json'}")
    if reference.best_index < 0 and planner_time is None:
        return EXIT_INFEASIBLE
    return EXIT_OK


def build_parser():
    parser = _Parser(
        prog="kinoplan",
        description="Minimum-time trajectory planning on triangulated terrain.",
    )
    parser.add_argument("--out-dir", default=".",
                        help="directory for generated files (default: .)")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("plan", help="solve one start/goal query",
                       description="Plan a minimum-time trajectory.")
    p.add_argument("--mesh", required=True)
    p.add_argument("--start", required=True, metavar="X,Y,Z")
    p.add_argument("--goal", required=True, metavar="X,Y,Z")
    p.add_argument("--pi-threshold", type=float, default=1e-6)
    p.add_argument("--table-cache", metavar="FILE",
                   help="npz cache for the transition table")
    _add_limit_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("transitions", help="export the transition table",
                       description="Write per-edge pitch data and forbidden "
                                   "turn pairs as CSV.")
    p.add_argument("--mesh", required=True)
    p.add_argument("--cache", metavar="FILE")
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_transitions)

    p = sub.add_parser("export-model", help="write the optimization model",
                       description="Build the model for a query and write it "
                                   "as LP or MPS text.")
    p.add_argument("--mesh", required=True)
    p.add_argument("--start", required=True, metavar="X,Y,Z")
    p.add_argument("--goal", required=True, metavar="X,Y,Z")
    p.add_argument("--format", choices=("lp", "mps"), default="lp")
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_export_model)

    p = sub.add_parser("eval", help="run a benchmark batch",
                       description="Solve scenario x limit-set combinations "
                                   "and write metric CSVs.")
    p.add_argument("--scenarios", required=True, metavar="CSV")
    p.add_argument("--sets", required=True, metavar="CSV")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("oracle", help="compare against brute force",
                       description="Enumerate all paths on a small mesh, "
                                   "score them on a velocity grid, and compare "
                                   "with the planner.")
    p.add_argument("--mesh", required=True)
    p.add_argument("--start", required=True, metavar="X,Y,Z")
    p.add_argument("--goal", required=True, metavar="X,Y,Z")
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--max-nodes", type=int, default=14)
    _add_limit_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleRequestError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (KinoplanError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
