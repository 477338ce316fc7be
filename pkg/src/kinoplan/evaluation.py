"""Solution-quality metrics, synthetic terrain generators, and batch runs."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleRequestError
from .kinematics import KinodynamicLimits, build_transition_table, yaw_cosine
from .mesh import MeshGraph, nearest_vertex, parse_mesh
from .model import PlanRequest, build_model
from .solver import SolveOptions, SolveStatus, solve_milp
from .trajectory import extract_path


@dataclass(frozen=True)
class ConstraintBreakdown:
    """Total constraint violation and its three kinematic components."""

    yaw: float
    acceleration: float
    velocity: float

    @property
    def total(self):
        return self.yaw + self.acceleration + self.velocity

    def __float__(self):
        return self.total


def constraint_error(trajectory, limits):
    """Sum of clipped constraint excesses along a trajectory.

    Adds heading changes beyond theta_max_yaw over consecutive edge pairs,
    acceleration magnitudes beyond a_max over edges, and node velocities
    beyond v_max. Zero means kinodynamically clean.
    """
    vecs = np.diff(trajectory.waypoints, axis=0)
    yaw = 0.0
    for k in range(len(vecs) - 1):
        cos_turn = yaw_cosine(vecs[k], vecs[k + 1])
        turn = math.acos(min(1.0, max(-1.0, cos_turn)))
        yaw += max(0.0, turn - limits.theta_max_yaw)
    accel = float(
        np.maximum(0.0, np.abs(trajectory.accelerations) - limits.a_max).sum()
    )
    vel = float(np.maximum(0.0, trajectory.node_velocities - limits.v_max).sum())
    return ConstraintBreakdown(yaw=yaw, acceleration=accel, velocity=vel)


def path_length_excess(waypoints):
    """Relative detour of a waypoint polyline over its endpoint chord."""
    wp = np.asarray(waypoints, dtype=np.float64)
    if wp.ndim != 2 or wp.shape[0] < 2 or wp.shape[1] != 3:
        raise ValueError("waypoints must be an (m, 3) array with m >= 2")
    chord = float(np.linalg.norm(wp[-1] - wp[0]))
    if chord < 1e-12:
        raise ValueError("endpoints coincide; relative detour is undefined")
    length = float(np.linalg.norm(np.diff(wp, axis=0), axis=1).sum())
    return (length - chord) / chord


# ------------------------------------------------------------ terrain synth

def _grid_sheet(nx, ny, spacing, origin, height):
    if nx < 2 or ny < 2:
        raise ValueError("grids need at least 2 x 2 vertices")
    ox, oy, oz = origin
    xs = ox + spacing * np.arange(nx)
    ys = oy + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)  # row-major: vertex id = iy * nx + ix
    gz = oz + height(gx, gy)
    vertices = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    faces = []
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            a = iy * nx + ix
            b = a + 1
            c = a + nx
            d = c + 1
            faces.append((a, b, c))
            faces.append((b, d, c))
    return MeshGraph(vertices, np.asarray(faces, dtype=np.int64))


def synth_mesh(kind, nx=11, ny=11, spacing=1.0, origin=(0.0, 0.0, 0.0),
               amplitude=0.3, periods=1.0, depth=0.5, radius=1.0,
               n_potholes=6, seed=0):
    """Deterministic triangulated test terrains.

    kinds: "plane-grid" (flat sheet), "ridge" (sinusoidal elevation along x),
    "pothole-field" (Gaussian depressions at seeded random centers).
    """
    if kind == "plane-grid":
        return _grid_sheet(nx, ny, spacing, origin, lambda gx, gy: 0.0 * gx)
    if kind == "ridge":
        span = spacing * (nx - 1)

        def height(gx, gy):
            return amplitude * np.sin(2.0 * np.pi * periods * (gx - origin[0]) / span)

        return _grid_sheet(nx, ny, spacing, origin, height)
    if kind == "pothole-field":
        rng = np.random.default_rng(seed)
        lo_x, hi_x = origin[0], origin[0] + spacing * (nx - 1)
        lo_y, hi_y = origin[1], origin[1] + spacing * (ny - 1)
        centers = np.column_stack([
            rng.uniform(lo_x + radius, max(hi_x - radius, lo_x + radius), n_potholes),
            rng.uniform(lo_y + radius, max(hi_y - radius, lo_y + radius), n_potholes),
        ])

        def height(gx, gy):
            z = np.zeros_like(gx)
            for cx, cy in centers:
                r2 = (gx - cx) ** 2 + (gy - cy) ** 2
                z = z - depth * np.exp(-r2 / (2.0 * radius ** 2))
            return z

        return _grid_sheet(nx, ny, spacing, origin, height)
    raise ValueError(f"unknown terrain kind {kind!r}")


# -------------------------------------------------------------- batch runs

@dataclass
class ScenarioSpec:
    mesh: str               # path to a mesh file
    start: tuple            # (x, y, z) snapped to the nearest vertex
    goal: tuple
    constraint_set: str     # limit-set id, or "*" for all sets
    runs: int = 1


_LIMIT_FIELDS = (
    "theta_max_yaw", "theta_max_pitch", "phi_max", "a_max", "v_max",
    "v_min", "kappa", "gamma", "s_upper",
)


def read_limit_sets_csv(path):
    """id-keyed KinodynamicLimits from CSV; blank optional cells use defaults."""
    sets = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            kwargs = {}
            for name in _LIMIT_FIELDS:
                raw = (row.get(name) or "").strip()
                if raw:
                    kwargs[name] = float(raw)
            sets[row["id"].strip()] = KinodynamicLimits(**kwargs)
    if not sets:
        raise ValueError(f"no limit sets found in {path}")
    return sets


def read_scenarios_csv(path):
    scenarios = []
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            scenarios.append(ScenarioSpec(
                mesh=row["mesh"].strip(),
                start=(float(row["start_x"]), float(row["start_y"]),
                       float(row["start_z"])),
                goal=(float(row["goal_x"]), float(row["goal_y"]),
                      float(row["goal_z"])),
                constraint_set=(row.get("constraint_set") or "*").strip() or "*",
                runs=int(row.get("runs") or 1),
            ))
    if not scenarios:
        raise ValueError(f"no scenarios found in {path}")
    return scenarios


_METRIC_COLUMNS = ("pi", "delta", "seconds_total")

RESULT_COLUMNS = (
    "mesh", "scenario", "constraint_set", "run", "status",
    "start_node", "goal_node", "objective", "bound", "bb_nodes",
    "pi", "pi_yaw", "pi_accel", "pi_vel", "delta",
    "time_model", "time_physical",
    "seconds_build", "seconds_solve", "seconds_extract", "seconds_total",
    "pi_norm", "delta_norm", "seconds_total_norm",
)


def run_batch(scenarios, limit_sets, solve_options=None, mesh_root=None):
    """Solve every scenario x limit-set x run combination.

    Returns one row dict per run with quality metrics, timings split into
    build/solve/extract, and min-max normalized columns for the comparable
    metrics. Rows for infeasible instances carry empty metric fields.
    """
    options = solve_options or SolveOptions()
    mesh_cache = {}
    rows = []
    for idx, scenario in enumerate(scenarios):
        mesh = mesh_cache.get(scenario.mesh)
        if mesh is None:
            path = scenario.mesh if mesh_root is None else f"{mesh_root}/{scenario.mesh}"
            mesh = parse_mesh(path)
            mesh_cache[scenario.mesh] = mesh
        if scenario.constraint_set == "*":
            selected = list(limit_sets.items())
        else:
            try:
                selected = [(scenario.constraint_set,
                             limit_sets[scenario.constraint_set])]
            except KeyError:
                raise ValueError(
                    f"scenario {idx} names unknown constraint set "
                    f"{scenario.constraint_set!r}"
                ) from None
        start = nearest_vertex(mesh, scenario.start)
        goal = nearest_vertex(mesh, scenario.goal)
        for set_id, limits in selected:
            for run in range(1, scenario.runs + 1):
                rows.append(_run_once(
                    mesh, scenario, idx, set_id, limits, start, goal, run,
                    options,
                ))
    _normalize(rows)
    return rows


def _run_once(mesh, scenario, idx, set_id, limits, start, goal, run, options):
    row = {name: None for name in RESULT_COLUMNS}
    row.update(
        mesh=scenario.mesh, scenario=idx, constraint_set=set_id, run=run,
        start_node=start, goal_node=goal,
    )
    t0 = time.perf_counter()
    try:
        table = build_transition_table(mesh, limits)
        model = build_model(mesh, table, PlanRequest(start, goal, limits))
    except InfeasibleRequestError:
        row["status"] = "infeasible"
        row["seconds_build"] = time.perf_counter() - t0
        row["seconds_total"] = row["seconds_build"]
        return row
    t1 = time.perf_counter()
    result = solve_milp(model, options)
    t2 = time.perf_counter()
    row["status"] = result.status.value
    row["bb_nodes"] = result.nodes
    row["seconds_build"] = t1 - t0
    row["seconds_solve"] = t2 - t1
    if result.status in (SolveStatus.OPTIMAL, SolveStatus.GAP_LIMIT):
        row["objective"] = result.objective
        row["bound"] = result.bound
        trajectory = extract_path(mesh, result)
        t3 = time.perf_counter()
        row["seconds_extract"] = t3 - t2
        err = constraint_error(trajectory, limits)
        row["pi"] = err.total
        row["pi_yaw"] = err.yaw
        row["pi_accel"] = err.acceleration
        row["pi_vel"] = err.velocity
        try:
            row["delta"] = path_length_excess(trajectory.waypoints)
        except ValueError:
            row["delta"] = None  # coincident endpoints
        row["time_model"] = trajectory.total_time_model
        row["time_physical"] = trajectory.total_time_physical
    else:
        row["seconds_extract"] = 0.0
    row["seconds_total"] = time.perf_counter() - t0
    return row


def _normalize(rows):
    for name in _METRIC_COLUMNS:
        values = [r[name] for r in rows if r[name] is not None]
        if not values:
            continue
        lo, hi = min(values), max(values)
        span = hi - lo
        for r in rows:
            if r[name] is None:
                continue
            r[name + "_norm"] = 0.0 if span == 0.0 else (r[name] - lo) / span


def aggregate(rows):
    """Per (mesh, scenario, constraint_set) mean/min/max of the metrics."""
    groups = {}
    for row in rows:
        groups.setdefault(
            (row["mesh"], row["scenario"], row["constraint_set"]), []
        ).append(row)
    out = []
    for (mesh, scenario, set_id), members in groups.items():
        agg = {
            "mesh": mesh, "scenario": scenario, "constraint_set": set_id,
            "n_runs": len(members),
        }
        for name in _METRIC_COLUMNS:
            values = [r[name] for r in members if r[name] is not None]
            if values:
                agg[name + "_mean"] = sum(values) / len(values)
                agg[name + "_min"] = min(values)
                agg[name + "_max"] = max(values)
            else:
                agg[name + "_mean"] = agg[name + "_min"] = agg[name + "_max"] = None
        out.append(agg)
    return out


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_results_csv(rows, target):
    _write_csv(target, RESULT_COLUMNS, rows)


def write_aggregates_csv(aggregates, target):
    columns = ["mesh", "scenario", "constraint_set", "n_runs"]
    for name in _METRIC_COLUMNS:
        columns += [name + "_mean", name + "_min", name + "_max"]
    _write_csv(target, columns, aggregates)


def _write_csv(target, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row.get(name)) for name in columns))
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as handle:
            handle.write(text)
