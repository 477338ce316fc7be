"""Turn an integral solve result into a checked, serializable trajectory."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExtractionError
from .kinematics import pitch_angle, yaw_cosine

# Edge traversal times use max(v, VELOCITY_FLOOR) so a near-zero relaxation
# velocity cannot produce an infinite physical time; floored edges are flagged.
VELOCITY_FLOOR = 1e-12


@dataclass
class Trajectory:
    """A node path with its velocity profile and derived timing."""

    nodes: np.ndarray            # (m,) vertex ids along the path
    waypoints: np.ndarray        # (m, 3) vertex coordinates
    node_velocities: np.ndarray  # (m,) velocity at each node
    edge_ids: np.ndarray         # (m-1,) directed edge ids in mesh numbering
    lengths: np.ndarray          # (m-1,) edge lengths
    edge_velocities: np.ndarray  # (m-1,) average edge velocities from the solve
    times: np.ndarray            # (m-1,) traversal time per edge
    accelerations: np.ndarray    # (m-1,) constant acceleration per edge
    total_time_physical: float   # sum of edge times
    total_time_model: float      # objective value of the solve
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_edges(self):
        return len(self.edge_ids)

    def path_length(self):
        return float(self.lengths.sum())


def extract_path(mesh, result):
    """Walk the selected edges of an integral solution into a Trajectory.

    `result` is a SolveResult whose model was produced by build_model for the
    same mesh; the request endpoints are read back from the model bookkeeping.
    The binary assignment must be integral; branching, disconnected cycles, or
    a dead end raise ExtractionError.
    """
    model = result.model
    values = result.values
    if values is None:
        raise ExtractionError("continuity: solve produced no assignment to extract")
    meta = model.meta
    edge_ids = meta["edge_ids"]
    x = values[model.columns_of("edge_use")]
    frac = np.abs(x - np.round(x))
    if frac.max(initial=0.0) > 1e-6:
        raise ExtractionError(
            f"continuity: assignment is not integral (max fraction {frac.max():.3e})"
        )
    selected = edge_ids[np.round(x).astype(bool)]
    start, goal = meta["start"], meta["goal"]

    tails = mesh.tails
    heads = mesh.heads
    out_by_node = {}
    for e in selected:
        out_by_node.setdefault(int(tails[e]), []).append(int(e))
    node = start
    nodes = [start]
    walk = []
    seen = {start}
    while node != goal:
        outs = out_by_node.get(node, [])
        if not outs:
            raise ExtractionError(f"continuity: walk dead-ends at node {node}")
        if len(outs) > 1:
            raise ExtractionError(
                f"branching: node {node} has {len(outs)} selected outgoing edges"
            )
        e = outs[0]
        node = int(heads[e])
        if node in seen:
            raise ExtractionError(f"cycle: walk revisits node {node}")
        seen.add(node)
        walk.append(e)
        nodes.append(node)
    leftover = set(int(e) for e in selected) - set(walk)
    if leftover:
        raise ExtractionError(
            f"cycle: selected edges {sorted(leftover)} are disconnected from the walk"
        )

    node_ids = meta["node_ids"]
    vn = values[model.columns_of("node_speed")]
    node_speed = {int(n): float(v) for n, v in zip(node_ids, vn)}
    edge_pos = {int(e): k for k, e in enumerate(edge_ids)}
    ve = values[model.columns_of("edge_speed")]
    s = values[model.columns_of("edge_slowness")]
    h = values[model.columns_of("used_slowness")]

    nodes = np.asarray(nodes, dtype=np.int64)
    walk = np.asarray(walk, dtype=np.int64)
    pos = np.array([edge_pos[int(e)] for e in walk], dtype=np.int64)
    lengths = mesh.lengths[walk]
    node_velocities = np.array([node_speed[int(n)] for n in nodes])
    edge_velocities = ve[pos]

    floored = edge_velocities < VELOCITY_FLOOR
    times = lengths / np.maximum(edge_velocities, VELOCITY_FLOOR)
    accelerations = (node_velocities[1:] ** 2 - node_velocities[:-1] ** 2) / (
        2.0 * lengths
    )
    sv_gap = np.abs(s[pos] * edge_velocities - 1.0)
    h_gap = np.abs(h[pos] - s[pos])  # x = 1 on the walk, so h should equal s
    diagnostics = {
        "slowness_product_gap": float(sv_gap.max(initial=0.0)),
        "used_slowness_gap": float(h_gap.max(initial=0.0)),
        "floored_edges": [int(k) for k in np.flatnonzero(floored)],
        "solver_status": result.status.value,
        "solver_nodes": result.nodes,
    }
    return Trajectory(
        nodes=nodes,
        waypoints=mesh.vertices[nodes],
        node_velocities=node_velocities,
        edge_ids=walk,
        lengths=lengths,
        edge_velocities=edge_velocities,
        times=times,
        accelerations=accelerations,
        total_time_physical=float(times.sum()),
        total_time_model=float(result.objective),
        diagnostics=diagnostics,
    )


@dataclass
class ValidationReport:
    """Per-element constraint excesses for a trajectory (zeros when clean)."""

    yaw_excess: np.ndarray          # (m-2,) heading change beyond the limit
    pitch_excess: np.ndarray        # (m-1,) per-edge slope beyond the limit
    pitch_step_excess: np.ndarray   # (m-2,) slope change beyond the limit
    acceleration_excess: np.ndarray  # (m-1,)
    velocity_excess: np.ndarray     # (m,) node velocity above v_max
    boundary_deviation: np.ndarray  # (2,) |v_first - kappa|, |v_last - gamma|
    forbidden_hits: list            # consecutive edge pairs in the forbidden set

    def max_violation(self):
        worst = 0.0
        for arr in (
            self.yaw_excess,
            self.pitch_excess,
            self.pitch_step_excess,
            self.acceleration_excess,
            self.velocity_excess,
            self.boundary_deviation,
        ):
            if len(arr):
                worst = max(worst, float(np.max(arr)))
        if self.forbidden_hits:
            worst = max(worst, math.inf)
        return worst

    def is_clean(self, tol=0.0):
        return self.max_violation() <= tol


def validate(trajectory, limits, table=None):
    """Recompute every kinodynamic constraint along the trajectory."""
    wp = trajectory.waypoints
    vecs = np.diff(wp, axis=0)
    m_edges = len(vecs)
    yaw_excess = np.zeros(max(m_edges - 1, 0))
    pitch_step_excess = np.zeros(max(m_edges - 1, 0))
    pitches = np.array([pitch_angle(v) for v in vecs])
    for k in range(m_edges - 1):
        cos_turn = yaw_cosine(vecs[k], vecs[k + 1])
        turn = math.acos(min(1.0, max(-1.0, cos_turn)))
        yaw_excess[k] = max(0.0, turn - limits.theta_max_yaw)
        pitch_step_excess[k] = max(
            0.0, abs(pitches[k + 1] - pitches[k]) - limits.theta_max_pitch
        )
    pitch_excess = np.maximum(0.0, np.abs(pitches) - limits.phi_max)
    acceleration_excess = np.maximum(
        0.0, np.abs(trajectory.accelerations) - limits.a_max
    )
    velocity_excess = np.maximum(0.0, trajectory.node_velocities - limits.v_max)
    boundary_deviation = np.array(
        [
            abs(trajectory.node_velocities[0] - limits.kappa),
            abs(trajectory.node_velocities[-1] - limits.gamma),
        ]
    )
    forbidden_hits = []
    if table is not None:
        for k in range(len(trajectory.edge_ids) - 1):
            pair = (int(trajectory.edge_ids[k]), int(trajectory.edge_ids[k + 1]))
            if table.is_forbidden(*pair):
                forbidden_hits.append(pair)
    return ValidationReport(
        yaw_excess=yaw_excess,
        pitch_excess=pitch_excess,
        pitch_step_excess=pitch_step_excess,
        acceleration_excess=acceleration_excess,
        velocity_excess=velocity_excess,
        boundary_deviation=boundary_deviation,
        forbidden_hits=forbidden_hits,
    )


def velocity_profile(trajectory):
    """(m, 2) array of (cumulative time, node velocity) samples."""
    t = np.concatenate(([0.0], np.cumsum(trajectory.times)))
    return np.column_stack([t, trajectory.node_velocities])


def acceleration_profile(trajectory):
    """(m-1, 2) array of (edge start time, edge acceleration) samples."""
    t = np.concatenate(([0.0], np.cumsum(trajectory.times[:-1])))
    return np.column_stack([t, trajectory.accelerations])


def to_json(trajectory, indent=2):
    payload = {
        "nodes": [int(n) for n in trajectory.nodes],
        "waypoints": [[float(c) for c in p] for p in trajectory.waypoints],
        "node_velocities": [float(v) for v in trajectory.node_velocities],
        "edge_ids": [int(e) for e in trajectory.edge_ids],
        "lengths": [float(d) for d in trajectory.lengths],
        "edge_velocities": [float(v) for v in trajectory.edge_velocities],
        "edge_times": [float(t) for t in trajectory.times],
        "edge_accelerations": [float(a) for a in trajectory.accelerations],
        "total_time_physical": trajectory.total_time_physical,
        "total_time_model": trajectory.total_time_model,
        "diagnostics": trajectory.diagnostics,
    }
    return json.dumps(payload, indent=indent)


def from_json(text):
    data = json.loads(text)
    return Trajectory(
        nodes=np.asarray(data["nodes"], dtype=np.int64),
        waypoints=np.asarray(data["waypoints"], dtype=np.float64),
        node_velocities=np.asarray(data["node_velocities"], dtype=np.float64),
        edge_ids=np.asarray(data["edge_ids"], dtype=np.int64),
        lengths=np.asarray(data["lengths"], dtype=np.float64),
        edge_velocities=np.asarray(data["edge_velocities"], dtype=np.float64),
        times=np.asarray(data["edge_times"], dtype=np.float64),
        accelerations=np.asarray(data["edge_accelerations"], dtype=np.float64),
        total_time_physical=float(data["total_time_physical"]),
        total_time_model=float(data["total_time_model"]),
        diagnostics=data.get("diagnostics", {}),
    )


def _write_rows(target, header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as handle:
            handle.write(text)


def write_velocity_csv(trajectory, target):
    _write_rows(target, "t,v", velocity_profile(trajectory))


def write_acceleration_csv(trajectory, target):
    _write_rows(target, "t,a", acceleration_profile(trajectory))
