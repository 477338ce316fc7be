"""Vehicle limits plus yaw/pitch transition feasibility over mesh edges.

A transition from directed edge k onto directed edge l (sharing the middle
node) is feasible when three geometric tests pass:

  1. yaw: the heading change measured on the xy-projections satisfies
     cos(angle) > cos(theta_max_yaw);
  2. absolute pitch: both edges climb or descend less steeply than phi_max;
  3. pitch change: |phi_l - phi_k| < theta_max_pitch.

All tests are geometric only, so the table depends on the mesh and the angle
limits but never on velocities. Strict inequalities are implemented with a
1e-9 tolerance in the permissive direction for floating-point robustness.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Default boundary velocity, exp(-24) ~ 3.775e-11 m/s: near-zero start/stop
#: while keeping reciprocal-velocity terms finite.
NEAR_ZERO_VELOCITY = math.exp(-24.0)

#: Feasibility slack applied to the strict geometric tests.
ANGLE_TOL = 1e-9

#: xy-projections shorter than this have no measurable heading.
DEGENERATE_XY = 1e-12


@dataclass(frozen=True)
class KinodynamicLimits:
    """Geometric and dynamic limits of the vehicle.

    Angles are radians, velocities m/s, acceleration m/s^2. ``s_upper`` caps
    the reciprocal-velocity bound when ``v_min`` is zero (any large positive
    value works; it must dominate 1/v for every reachable velocity).
    """

    theta_max_yaw: float
    theta_max_pitch: float
    phi_max: float
    a_max: float
    v_max: float
    v_min: float = 0.0
    kappa: float = NEAR_ZERO_VELOCITY
    gamma: float = NEAR_ZERO_VELOCITY
    s_upper: float = 1e6

    def __post_init__(self):
        for name in (
            "theta_max_yaw",
            "theta_max_pitch",
            "phi_max",
            "a_max",
            "v_max",
            "v_min",
            "kappa",
            "gamma",
            "s_upper",
        ):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if not 0 <= self.v_min < self.v_max:
            raise ValueError("need 0 <= v_min < v_max")
        if not 0 <= self.kappa <= self.v_max:
            raise ValueError("kappa must lie in [0, v_max]")
        if not 0 <= self.gamma <= self.v_max:
            raise ValueError("gamma must lie in [0, v_max]")
        if not 0 < self.theta_max_yaw < math.pi:
            raise ValueError("theta_max_yaw must lie in (0, pi)")
        if not 0 < self.phi_max <= math.pi / 2:
            raise ValueError("phi_max must lie in (0, pi/2]")
        if not 0 < self.theta_max_pitch <= math.pi:
            raise ValueError("theta_max_pitch must lie in (0, pi]")
        if self.s_upper < 1.0 / self.v_max:
            raise ValueError("s_upper must be at least 1/v_max")

    @property
    def s_lower(self):
        """Lower bound of the reciprocal velocity, 1/v_max."""
        return 1.0 / self.v_max

    @property
    def s_cap(self):
        """Upper bound of the reciprocal velocity: 1/v_min, or s_upper at v_min = 0."""
        return 1.0 / self.v_min if self.v_min > 0 else self.s_upper


# Shared baseline for user-facing surfaces (CLI flags, MeshPlanner __init__)
DEFAULT_LIMITS = KinodynamicLimits(
    theta_max_yaw=math.pi / 3,
    theta_max_pitch=math.pi / 6,
    phi_max=math.pi / 4,
    a_max=0.5,
    v_max=0.5,
)


def yaw_cosine(e_k, e_l):
    """Cosine of the heading change between two edge vectors.

    Uses the xy-projections only. When either projection is shorter than
    1e-12 the heading change is undefined and reported as cosine 1 (no turn);
    pitch limits govern such near-vertical edges.
    """
    ax, ay = float(e_k[0]), float(e_k[1])
    bx, by = float(e_l[0]), float(e_l[1])
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na < DEGENERATE_XY or nb < DEGENERATE_XY:
        return 1.0
    c = (ax * bx + ay * by) / (na * nb)
    return min(1.0, max(-1.0, c))


def pitch_angle(e_k):
    """Signed slope angle of an edge vector: atan2(e_z, |e_xy|), in [-pi/2, pi/2]."""
    x, y, z = (float(c) for c in e_k)
    if x == 0.0 and y == 0.0 and z == 0.0:
        raise ValueError("pitch of a zero vector is undefined")
    return math.atan2(z, math.hypot(x, y))


class TransitionTable:
    """Precomputed transition feasibility for one mesh and one set of limits.

    Attributes:
        edge_pitch: (n_edges,) signed pitch per directed edge, radians.
        pitch_ok: (n_edges,) bool, |pitch| within phi_max.
        forbidden_pairs: sorted (F, 2) int array of ordered edge pairs (k, l)
            with head(k) = tail(l) where both edges pass the per-edge pitch
            test but the pair fails the yaw or pitch-change test.
    """

    def __init__(self, edge_pitch, pitch_ok, forbidden_pairs):
        self.edge_pitch = np.asarray(edge_pitch, dtype=np.float64)
        self.pitch_ok = np.asarray(pitch_ok, dtype=bool)
        pairs = np.asarray(forbidden_pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.shape[0]:
            order = np.lexsort((pairs[:, 1], pairs[:, 0]))
            pairs = pairs[order]
        self.forbidden_pairs = pairs
        for arr in (self.edge_pitch, self.pitch_ok, self.forbidden_pairs):
            arr.setflags(write=False)
        self._forbidden_set = frozenset(map(tuple, pairs.tolist()))

    def is_forbidden(self, k, l):
        return (k, l) in self._forbidden_set

    @property
    def n_forbidden(self):
        return len(self.forbidden_pairs)


def build_transition_table(mesh, limits):
    """Evaluate the three transition tests for every ordered adjacent edge pair.

    Pairs are ordered (k, l) with head(k) = tail(l); both orientations of
    every undirected edge participate. Only failing pairs are stored since
    passing pairs impose no constraint.
    """
    vec = mesh.vectors
    xy_norm = np.hypot(vec[:, 0], vec[:, 1])
    pitch = np.arctan2(vec[:, 2], xy_norm)
    pitch_ok = np.abs(pitch) <= limits.phi_max + ANGLE_TOL

    degenerate = xy_norm < DEGENERATE_XY
    safe = np.where(degenerate, 1.0, xy_norm)
    unit_xy = vec[:, :2] / safe[:, None]
    unit_xy[degenerate] = 0.0

    alpha = math.cos(limits.theta_max_yaw)
    forbidden = []
    for node in range(mesh.n_vertices):
        incoming = mesh.in_edges[node]
        outgoing = mesh.out_edges[node]
        if not len(incoming) or not len(outgoing):
            continue
        cos_m = unit_xy[incoming] @ unit_xy[outgoing].T
        # degenerate projections count as "no heading change"
        cos_m[degenerate[incoming]] = 1.0
        cos_m[:, degenerate[outgoing]] = 1.0
        yaw_bad = cos_m < alpha - ANGLE_TOL
        pitch_pair_bad = (
            np.abs(pitch[outgoing][None, :] - pitch[incoming][:, None])
            > limits.theta_max_pitch + ANGLE_TOL
        )
        # pairs touching an inadmissible edge are omitted: those edges never
        # enter a model, so listing their pairs would only add dead rows
        both_ok = pitch_ok[incoming][:, None] & pitch_ok[outgoing][None, :]
        bad = (yaw_bad | pitch_pair_bad) & both_ok
        ki, li = np.nonzero(bad)
        if len(ki):
            forbidden.append(
                np.column_stack([incoming[ki], outgoing[li]])
            )
    pairs = (
        np.concatenate(forbidden, axis=0)
        if forbidden
        else np.empty((0, 2), dtype=np.int64)
    )
    return TransitionTable(pitch, pitch_ok, pairs)


def write_table_csv(mesh, table, edges_target, pairs_target):
    """Dump per-edge pitch data and forbidden pairs as two CSV files.

    Edge columns: edge_id,tail,head,pitch_rad,pitch_ok. Pair columns: k,l.
    Targets may be paths or open text streams.
    """

    def _emit(target, rows, header):
        own = isinstance(target, (str, Path))
        stream = open(target, "w", newline="") if own else target
        try:
            writer = csv.writer(stream)
            writer.writerow(header)
            writer.writerows(rows)
        finally:
            if own:
                stream.close()

    edge_rows = (
        (e, mesh.tails[e], mesh.heads[e], repr(float(table.edge_pitch[e])),
         int(table.pitch_ok[e]))
        for e in range(mesh.n_edges)
    )
    _emit(edges_target, edge_rows, ["edge_id", "tail", "head", "pitch_rad", "pitch_ok"])
    _emit(pairs_target, map(tuple, table.forbidden_pairs.tolist()), ["k", "l"])


def table_to_bytes(table):
    """Serialize a TransitionTable for on-disk caching."""
    buf = io.BytesIO()
    np.savez(
        buf,
        edge_pitch=table.edge_pitch,
        pitch_ok=table.pitch_ok,
        forbidden_pairs=table.forbidden_pairs,
    )
    return buf.getvalue()


def table_from_bytes(data):
    buf = io.BytesIO(data)
    with np.load(buf) as npz:
        return TransitionTable(
            npz["edge_pitch"], npz["pitch_ok"], npz["forbidden_pairs"]
        )
