"""Assembly of the minimum-time mixed-integer linear program.

Decision variables, per pitch-admissible directed edge i with tail a, head b:

    x_i    binary edge selection
    v_i    average velocity on the edge, 2 v_i = v_a + v_b
    s_i    reciprocal velocity, relaxation of s_i v_i = 1
    h_i    selected reciprocal velocity, relaxation of h_i = x_i s_i
    lam_i  relaxation of the product (v_b - v_a)(v_a + v_b), whose true value
           is the change of squared speed along the edge

plus one velocity v_n per node. The objective minimizes sum(d_i * h_i), the
model's total traversal time. Acceleration is limited through
lam_i <= 2 d_i a_max; the deceleration side needs no row of its own because
the twin edge carries the negated squared-speed change.

Each bilinear product is replaced by its four McCormick envelope inequalities
over the variable box; products with a binary factor collapse to exact
equality at integral points. The difference and sum of the endpoint speeds
enter the lam envelope as substituted linear expressions, so no extra columns
are created for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleRequestError
from .kinematics import KinodynamicLimits


@dataclass(frozen=True)
class PlanRequest:
    """One start-to-goal query. Both endpoints are mesh vertex ids."""

    start: int
    goal: int
    limits: KinodynamicLimits


class MilpModel:
    """Immutable MILP container: bounded variables, linear rows, objective.

    Rows are stored in deterministic order with senses 'L' (<=), 'G' (>=) or
    'E' (=). ``var_info`` and ``row_info`` map columns/rows back to their
    semantic origin (variable family and edge/node id) for models built by
    :func:`build_model`; imported models carry ``None`` there.
    """

    def __init__(
        self,
        var_names,
        lower,
        upper,
        is_integer,
        objective,
        row_names,
        senses,
        rhs,
        entries,
        var_info=None,
        row_info=None,
        meta=None,
    ):
        self.var_names = list(var_names)
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        self.is_integer = np.asarray(is_integer, dtype=bool)
        self.objective = np.asarray(objective, dtype=np.float64)
        self.row_names = list(row_names)
        self.senses = np.asarray(senses, dtype="U1")
        self.rhs = np.asarray(rhs, dtype=np.float64)
        n, m = len(self.var_names), len(self.row_names)
        for arr, length, label in (
            (self.lower, n, "lower"),
            (self.upper, n, "upper"),
            (self.is_integer, n, "is_integer"),
            (self.objective, n, "objective"),
            (self.senses, m, "senses"),
            (self.rhs, m, "rhs"),
        ):
            if len(arr) != length:
                raise ValueError(f"{label} has length {len(arr)}, expected {length}")
        rows, cols, vals = (np.asarray(a) for a in entries)
        if rows.size:
            if rows.min() < 0 or rows.max() >= m:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n:
                raise ValueError("constraint references an undeclared variable")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite constraint coefficient")
        if not set(np.unique(self.senses)) <= {"L", "G", "E"}:
            raise ValueError("row sense must be 'L', 'G' or 'E'")
        mat = sp.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(m, n)
        ).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        self.matrix = mat
        self.var_info = None if var_info is None else list(var_info)
        self.row_info = None if row_info is None else list(row_info)
        self.meta = meta
        self._var_index = {name: j for j, name in enumerate(self.var_names)}
        self._lp_cache = None

    @property
    def n_vars(self):
        return len(self.var_names)

    @property
    def n_rows(self):
        return len(self.row_names)

    def var_index(self, name):
        return self._var_index[name]

    def row_entries(self, r):
        """(column indices, coefficients) of row r, column-ascending."""
        lo, hi = self.matrix.indptr[r], self.matrix.indptr[r + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def objective_value(self, values):
        return float(self.objective @ values)

    def row_violations(self, values, senses_mask=None):
        """Per-row constraint violation magnitudes at a point."""
        act = self.matrix @ values
        gap = act - self.rhs
        viol = np.zeros(self.n_rows)
        le = self.senses == "L"
        ge = self.senses == "G"
        eq = self.senses == "E"
        viol[le] = np.maximum(0.0, gap[le])
        viol[ge] = np.maximum(0.0, -gap[ge])
        viol[eq] = np.abs(gap[eq])
        return viol

    def max_violation(self, values):
        """Worst row or bound violation at a point."""
        worst = float(self.row_violations(values).max(initial=0.0))
        worst = max(worst, float(np.max(self.lower - values, initial=0.0)))
        worst = max(worst, float(np.max(values - self.upper, initial=0.0)))
        return worst

    def lp_arrays(self):
        """Split rows into (c, A_ub, b_ub, A_eq, b_eq) for an LP backend."""
        if self._lp_cache is None:
            le = np.flatnonzero(self.senses == "L")
            ge = np.flatnonzero(self.senses == "G")
            eq = np.flatnonzero(self.senses == "E")
            a_ub = sp.vstack(
                [self.matrix[le], -self.matrix[ge]], format="csr"
            ) if (len(le) or len(ge)) else None
            b_ub = np.concatenate([self.rhs[le], -self.rhs[ge]]) if a_ub is not None else None
            a_eq = self.matrix[eq] if len(eq) else None
            b_eq = self.rhs[eq] if a_eq is not None else None
            self._lp_cache = (self.objective, a_ub, b_ub, a_eq, b_eq)
        return self._lp_cache

    def family_counts(self):
        """Row counts keyed by constraint family (built models only)."""
        if self.row_info is None:
            raise ValueError("model has no row bookkeeping")
        counts = {}
        for kind, _ in self.row_info:
            counts[kind] = counts.get(kind, 0) + 1
        return counts

    def columns_of(self, kind):
        """Column indices of one variable family, in declaration order."""
        if self.var_info is None:
            raise ValueError("model has no variable bookkeeping")
        return np.array(
            [j for j, (k, _) in enumerate(self.var_info) if k == kind], dtype=np.int64
        )

    def _signature(self):
        # keyed by names and sorted so column/term order never matters
        rows = {}
        for r, name in enumerate(self.row_names):
            cols, vals = self.row_entries(r)
            terms = tuple(sorted(
                (self.var_names[c], float(v)) for c, v in zip(cols, vals) if v != 0.0
            ))
            rows[name] = (str(self.senses[r]), float(self.rhs[r]), terms)
        variables = tuple(sorted(
            (
                name,
                float(self.lower[j]),
                float(self.upper[j]),
                bool(self.is_integer[j]),
                float(self.objective[j]),
            )
            for j, name in enumerate(self.var_names)
        ))
        return variables, rows

    def __eq__(self, other):
        if not isinstance(other, MilpModel):
            return NotImplemented
        return self._signature() == other._signature()

    def __repr__(self):
        nb = int(self.is_integer.sum())
        return (
            f"MilpModel(vars={self.n_vars} ({nb} binary), rows={self.n_rows}, "
            f"nnz={self.matrix.nnz})"
        )


def build_model(mesh, table, request, gate_acceleration=False):
    """Build the relaxed minimum-time MILP for one plan request.

    Only pitch-admissible directed edges enter the model; nodes with no
    admissible incident edge are dropped entirely. Row and column order is a
    deterministic function of mesh edge/node enumeration.

    Args:
        mesh: MeshGraph.
        table: TransitionTable built for the same mesh and limits.
        request: PlanRequest; start and goal must remain connected to the
            admissible edge set.
        gate_acceleration: when True, the squared-speed-change envelope rows
            are deactivated on unselected edges through big-M terms on x_i
            (experimental; the default couples the full velocity field).

    Raises:
        ValueError: start equals goal, or an endpoint id is out of range.
        InfeasibleRequestError: an endpoint is isolated after pitch filtering.
    """
    limits = request.limits
    n1, nf = int(request.start), int(request.goal)
    if not (0 <= n1 < mesh.n_vertices and 0 <= nf < mesh.n_vertices):
        raise ValueError("start or goal vertex id out of range")
    if n1 == nf:
        raise ValueError("start and goal must differ")

    edge_ids = np.flatnonzero(table.pitch_ok)
    n_e = len(edge_ids)
    tails = mesh.tails[edge_ids]
    heads = mesh.heads[edge_ids]
    lengths = mesh.lengths[edge_ids]
    node_ids = np.unique(np.concatenate([tails, heads])) if n_e else np.array([], dtype=np.int64)
    for endpoint, label in ((n1, "start"), (nf, "goal")):
        if endpoint not in node_ids:
            raise InfeasibleRequestError(
                f"{label} vertex {endpoint} has no pitch-admissible incident edge"
            )

    n_k = len(node_ids)
    node_pos = np.full(mesh.n_vertices, -1, dtype=np.int64)
    node_pos[node_ids] = np.arange(n_k)
    edge_pos = np.full(mesh.n_edges, -1, dtype=np.int64)
    edge_pos[edge_ids] = np.arange(n_e)

    # column layout: x | v_n | v_e | s | h | lam
    col_x = np.arange(n_e)
    col_vn = n_e + np.arange(n_k)
    col_ve = n_e + n_k + np.arange(n_e)
    col_s = n_e + n_k + n_e + np.arange(n_e)
    col_h = n_e + n_k + 2 * n_e + np.arange(n_e)
    col_lam = n_e + n_k + 3 * n_e + np.arange(n_e)
    n_vars = 5 * n_e + n_k

    s_lo = limits.s_lower
    s_hi = limits.s_cap
    mu_hi = limits.v_max - limits.v_min
    mu_lo = -mu_hi
    rho_lo = 2.0 * limits.v_min
    rho_hi = 2.0 * limits.v_max
    lam_lo = mu_lo * rho_hi
    lam_cap = 2.0 * lengths * limits.a_max

    var_names = (
        [f"x_e{e}" for e in edge_ids]
        + [f"v_n{k}" for k in node_ids]
        + [f"v_e{e}" for e in edge_ids]
        + [f"s_e{e}" for e in edge_ids]
        + [f"h_e{e}" for e in edge_ids]
        + [f"lam_e{e}" for e in edge_ids]
    )
    var_info = (
        [("edge_use", int(e)) for e in edge_ids]
        + [("node_speed", int(k)) for k in node_ids]
        + [("edge_speed", int(e)) for e in edge_ids]
        + [("edge_slowness", int(e)) for e in edge_ids]
        + [("used_slowness", int(e)) for e in edge_ids]
        + [("speed_sq_delta", int(e)) for e in edge_ids]
    )
    lower = np.concatenate(
        [
            np.zeros(n_e),
            np.full(n_k, limits.v_min),
            np.zeros(n_e),
            np.full(n_e, s_lo),
            np.zeros(n_e),
            np.full(n_e, lam_lo),
        ]
    )
    upper = np.concatenate(
        [
            np.ones(n_e),
            np.full(n_k, limits.v_max),
            np.full(n_e, limits.v_max),
            np.full(n_e, s_hi),
            np.full(n_e, np.inf),
            lam_cap if not gate_acceleration else np.full(n_e, np.inf),
        ]
    )
    is_integer = np.zeros(n_vars, dtype=bool)
    is_integer[col_x] = True
    objective = np.zeros(n_vars)
    objective[col_h] = lengths

    rows = []
    cols = []
    vals = []
    row_names = []
    senses = []
    rhs = []
    row_info = []
    counter = [0]

    def block(n_rows_added, r_idx, c_idx, v, names, sense, rhs_vals, info):
        base = counter[0]
        rows.append(np.asarray(r_idx) + base)
        cols.append(np.asarray(c_idx))
        vals.append(np.asarray(v, dtype=np.float64))
        row_names.extend(names)
        senses.append(np.full(n_rows_added, sense, dtype="U1"))
        rhs.append(np.asarray(rhs_vals, dtype=np.float64))
        row_info.extend(info)
        counter[0] += n_rows_added

    # flow conservation: +1 on outgoing, -1 on incoming; net flow is +1 at
    # the start, -1 at the goal, 0 elsewhere
    tail_rows = node_pos[tails]
    head_rows = node_pos[heads]
    flow_rhs = np.zeros(n_k)
    flow_rhs[node_pos[n1]] = 1.0
    flow_rhs[node_pos[nf]] = -1.0
    # equality senses differ per row never; all 'E'
    block(
        n_k,
        np.concatenate([tail_rows, head_rows]),
        np.concatenate([col_x, col_x]),
        np.concatenate([np.ones(n_e), -np.ones(n_e)]),
        [f"flow_n{k}" for k in node_ids],
        "E",
        flow_rhs,
        [("flow", int(k)) for k in node_ids],
    )

    # curvature: forbidden consecutive pairs may not both be selected
    pairs = table.forbidden_pairs
    if len(pairs):
        keep = (edge_pos[pairs[:, 0]] >= 0) & (edge_pos[pairs[:, 1]] >= 0)
        pairs = pairs[keep]
    n_f = len(pairs)
    if n_f:
        pk = edge_pos[pairs[:, 0]]
        pl = edge_pos[pairs[:, 1]]
        block(
            n_f,
            np.concatenate([np.arange(n_f), np.arange(n_f)]),
            np.concatenate([col_x[pk], col_x[pl]]),
            np.ones(2 * n_f),
            [f"curv_e{k}_e{l}" for k, l in pairs],
            "L",
            np.ones(n_f),
            [("curvature", (int(k), int(l))) for k, l in pairs],
        )

    # velocity coupling: 2 v_i = v_a + v_b
    er = np.arange(n_e)
    block(
        n_e,
        np.concatenate([er, er, er]),
        np.concatenate([col_ve, col_vn[node_pos[tails]], col_vn[node_pos[heads]]]),
        np.concatenate([np.full(n_e, 2.0), -np.ones(n_e), -np.ones(n_e)]),
        [f"cpl_e{e}" for e in edge_ids],
        "E",
        np.zeros(n_e),
        [("coupling", int(e)) for e in edge_ids],
    )

    def envelope_block(tag, variant, c1, v1, c2, v2, c3, v3, sense, rhs_vals):
        block(
            n_e,
            np.concatenate([er, er, er]),
            np.concatenate([c1, c2, c3]),
            np.concatenate([v1, v2, v3]),
            [f"{tag}{variant}_e{e}" for e in edge_ids],
            sense,
            rhs_vals,
            [(tag, (int(e), variant)) for e in edge_ids],
        )

    ones = np.ones(n_e)
    # selected reciprocal velocity: envelope of h = x * s over x in [0, 1]
    envelope_block("hmc", 1, col_x, s_lo * ones, col_h, -ones, col_s, 0.0 * ones,
                   "L", np.zeros(n_e))
    envelope_block("hmc", 2, col_h, ones, col_x, -s_hi * ones, col_s, 0.0 * ones,
                   "L", np.zeros(n_e))
    envelope_block("hmc", 3, col_s, ones, col_x, s_hi * ones, col_h, -ones,
                   "L", np.full(n_e, s_hi))
    envelope_block("hmc", 4, col_h, ones, col_s, -ones, col_x, -s_lo * ones,
                   "L", np.full(n_e, -s_lo))

    # reciprocal identity: envelope of s * v = 1 over the velocity box
    v_lo, v_hi = limits.v_min, limits.v_max
    envelope_block("svmc", 1, col_ve, s_lo * ones, col_s, v_lo * ones, col_h, 0.0 * ones,
                   "L", np.full(n_e, 1.0 + s_lo * v_lo))
    envelope_block("svmc", 2, col_ve, s_hi * ones, col_s, v_hi * ones, col_h, 0.0 * ones,
                   "L", np.full(n_e, 1.0 + s_hi * v_hi))
    envelope_block("svmc", 3, col_ve, s_hi * ones, col_s, v_lo * ones, col_h, 0.0 * ones,
                   "G", np.full(n_e, 1.0 + s_hi * v_lo))
    envelope_block("svmc", 4, col_ve, s_lo * ones, col_s, v_hi * ones, col_h, 0.0 * ones,
                   "G", np.full(n_e, 1.0 + s_lo * v_hi))

    # squared-speed change: envelope of lam = mu * rho with mu = v_b - v_a
    # and rho = v_a + v_b substituted in place
    ca = col_vn[node_pos[tails]]
    cb = col_vn[node_pos[heads]]

    def accel_row(variant, mu_c, rho_c, sense):
        # lam - mu_c*(v_a + v_b) - rho_c*(v_b - v_a) {sense} -mu_c*rho_c
        a_coef = (-mu_c + rho_c) * ones
        b_coef = (-mu_c - rho_c) * ones
        r = np.full(n_e, -mu_c * rho_c)
        if gate_acceleration:
            big_m = 2.0 * (mu_hi - mu_lo) * (rho_hi - rho_lo) + np.abs(r)
            sign = -1.0 if sense == "G" else 1.0
            block(
                n_e,
                np.concatenate([er, er, er, er]),
                np.concatenate([col_lam, ca, cb, col_x]),
                np.concatenate([ones, a_coef, b_coef, sign * big_m]),
                [f"acmc{variant}_e{e}" for e in edge_ids],
                sense,
                r + sign * big_m,
                [("acmc", (int(e), variant)) for e in edge_ids],
            )
        else:
            block(
                n_e,
                np.concatenate([er, er, er]),
                np.concatenate([col_lam, ca, cb]),
                np.concatenate([ones, a_coef, b_coef]),
                [f"acmc{variant}_e{e}" for e in edge_ids],
                sense,
                r,
                [("acmc", (int(e), variant)) for e in edge_ids],
            )

    accel_row(1, mu_lo, rho_lo, "G")
    accel_row(2, mu_hi, rho_hi, "G")
    accel_row(3, mu_hi, rho_lo, "L")
    accel_row(4, mu_lo, rho_hi, "L")

    if gate_acceleration:
        # the cap must be a row so it can carry the big-M relief term
        big_m = lam_cap + abs(lam_lo) + 2.0 * (mu_hi - mu_lo) * (rho_hi - rho_lo)
        block(
            n_e,
            np.concatenate([er, er]),
            np.concatenate([col_lam, col_x]),
            np.concatenate([ones, big_m]),
            [f"accap_e{e}" for e in edge_ids],
            "L",
            lam_cap + big_m,
            [("accap", int(e)) for e in edge_ids],
        )

    # boundary velocities
    block(
        2,
        np.array([0, 1]),
        np.array([col_vn[node_pos[n1]], col_vn[node_pos[nf]]]),
        np.array([1.0, 1.0]),
        ["vstart", "vgoal"],
        "E",
        np.array([limits.kappa, limits.gamma]),
        [("boundary", "start"), ("boundary", "goal")],
    )

    meta = {
        "edge_ids": edge_ids,
        "node_ids": node_ids,
        "lengths": lengths,
        "tails": tails,
        "heads": heads,
        "start": n1,
        "goal": nf,
        "limits": limits,
    }
    return MilpModel(
        var_names,
        lower,
        upper,
        is_integer,
        objective,
        row_names,
        np.concatenate(senses),
        np.concatenate(rhs),
        (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)),
        var_info=var_info,
        row_info=row_info,
        meta=meta,
    )
