"""Deterministic branch-and-bound MILP solver.

The LP relaxation at every node is solved by the HiGHS dual simplex through
scipy. Branching follows the most fractional binary (score |x - round(x)|,
ties broken by the lowest column index). Node selection is best-first on the
parent relaxation bound, with depth-first plunging from each selected node to
reach incumbents early. Identical inputs and options always produce identical
node counts and incumbents.

Every incumbent is obtained by fixing its binaries and re-solving the LP, so
the reported objective is exact for that binary assignment, never a stale
relaxation value.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from .errors import SolverNumericalError, UnboundedError


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    GAP_LIMIT = "gap_limit"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class SolveOptions:
    """Branch-and-bound controls. Zero-valued limits mean unlimited.

    ``gap_tol`` is the proof tolerance: the search stops as soon as the
    relative incumbent/bound gap falls below it, reported as optimal.
    ``gap_limit``, when positive, is a looser early-stop threshold reported
    as a gap-limit outcome. ``seed`` is accepted for interface stability but
    unused: the algorithm is deterministic.
    """

    gap_tol: float = 1e-6
    integrality_tol: float = 1e-6
    lp_feasibility_tol: float = 1e-9
    gap_limit: float = 0.0
    node_limit: int = 0
    time_limit: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.gap_tol <= 0 or self.integrality_tol <= 0 or self.lp_feasibility_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.gap_limit < 0 or self.node_limit < 0 or self.time_limit < 0:
            raise ValueError("limits must be non-negative")


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "numerical"
    objective: float | None = None
    values: np.ndarray | None = None


@dataclass
class SolveResult:
    status: SolveStatus
    objective: float | None
    bound: float
    values: np.ndarray | None
    nodes: int
    wall_time: float
    model: object = field(repr=False, default=None)

    @property
    def gap(self):
        """Relative incumbent/bound gap; 0 when proven exactly."""
        if self.objective is None:
            return float("inf")
        return (self.objective - self.bound) / max(1.0, abs(self.objective))


def solve_lp(model, lower=None, upper=None, tol=1e-9):
    """Solve the LP relaxation of ``model`` with optional bound overrides.

    Returns an LpSolution whose status is "optimal", "infeasible",
    "unbounded" or "numerical". The backend returns an optimal basic
    solution, so values sit on a vertex of the feasible polytope.
    """
    c, a_ub, b_ub, a_eq, b_eq = model.lp_arrays()
    lo = model.lower if lower is None else lower
    hi = model.upper if upper is None else upper
    if np.any(lo > hi):
        return LpSolution("infeasible")
    bounds = np.column_stack([lo, hi])
    options = {
        "presolve": True,
        "primal_feasibility_tolerance": max(tol, 1e-10),
        "dual_feasibility_tolerance": max(tol, 1e-10),
    }
    # dual simplex occasionally gives up on ill-conditioned nodes (the
    # slowness envelopes carry 1e6-scale coefficients); fall back to the
    # other HiGHS algorithms before reporting a numerical failure
    for method in ("highs-ds", "highs", "highs-ipm"):
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=bounds,
            method=method,
            options=options,
        )
        if res.status != 4:
            break
    if res.status == 0:
        return LpSolution("optimal", float(res.fun), np.asarray(res.x))
    if res.status == 2:
        return LpSolution("infeasible")
    if res.status == 3:
        return LpSolution("unbounded")
    return LpSolution("numerical")


def _most_fractional(values, int_cols, tol):
    """Index of the binary farthest from integrality, or -1 if none."""
    frac = np.abs(values[int_cols] - np.round(values[int_cols]))
    j = int(np.argmax(frac))
    if frac[j] <= tol:
        return -1
    # argmax already favors the lowest index on exact ties
    return int(int_cols[j])


def solve_milp(model, opts=None):
    """Solve a MilpModel to proven optimality by branch-and-bound.

    Raises:
        UnboundedError: the LP relaxation is unbounded below.
        SolverNumericalError: the LP backend failed numerically.
    """
    opts = opts or SolveOptions()
    t0 = time.monotonic()
    int_cols = np.flatnonzero(model.is_integer)
    # branching fixes columns to 0/1, so wider integer domains would be
    # searched incompletely and must be rejected up front
    if int_cols.size and (
        np.any(model.lower[int_cols] < 0.0) or np.any(model.upper[int_cols] > 1.0)
    ):
        raise ValueError("integer columns must have bounds within [0, 1]")

    best_obj = np.inf
    best_values = None
    nodes = 0
    stop_status = None

    def lp_at(fixings):
        nonlocal nodes
        nodes += 1
        if fixings:
            lo = model.lower.copy()
            hi = model.upper.copy()
            for col, val in fixings.items():
                lo[col] = val
                hi[col] = val
        else:
            lo = hi = None
        sol = solve_lp(model, lo, hi, opts.lp_feasibility_tol)
        if sol.status == "unbounded":
            raise UnboundedError("LP relaxation is unbounded below")
        if sol.status == "numerical":
            raise SolverNumericalError("LP backend reported a numerical failure")
        return sol

    def accept_incumbent(values):
        """Fix all binaries at their rounded values and re-solve for an exact point."""
        nonlocal best_obj, best_values
        lo = model.lower.copy()
        hi = model.upper.copy()
        rounded = np.round(values[int_cols])
        lo[int_cols] = rounded
        hi[int_cols] = rounded
        sol = solve_lp(model, lo, hi, opts.lp_feasibility_tol)
        if sol.status != "optimal":
            return
        if sol.objective < best_obj - 1e-12:
            best_obj = sol.objective
            best_values = sol.values

    def out_of_budget():
        if opts.node_limit and nodes >= opts.node_limit:
            return SolveStatus.NODE_LIMIT
        if opts.time_limit and time.monotonic() - t0 > opts.time_limit:
            return SolveStatus.TIME_LIMIT
        return None

    # heap of open nodes keyed by parent relaxation bound, then insertion order
    heap = []
    seq = 0
    heapq.heappush(heap, (-np.inf, seq, {}))
    # tightest bound among nodes closed by tolerance pruning; keeps the
    # reported proof bound honest when pruning gives up slack below gap_tol
    closed_bound = np.inf

    def push(bound, fixings):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (bound, seq, fixings))

    def prune_threshold():
        if not np.isfinite(best_obj):
            return np.inf
        return best_obj - opts.gap_tol * max(1.0, abs(best_obj))

    while heap:
        bound, _, fixings = heapq.heappop(heap)
        prune_at = prune_threshold()
        if bound >= prune_at:
            closed_bound = min(closed_bound, bound)
            continue
        if np.isfinite(best_obj) and opts.gap_limit:
            open_bound = min(bound, heap[0][0]) if heap else bound
            rel_gap = (best_obj - open_bound) / max(1.0, abs(best_obj))
            if rel_gap <= opts.gap_limit:
                stop_status = SolveStatus.GAP_LIMIT
                push(bound, fixings)
                break
        stop_status = out_of_budget()
        if stop_status:
            push(bound, fixings)
            break

        # depth-first plunge from the selected node
        while True:
            sol = lp_at(fixings)
            if sol.status == "infeasible":
                break
            if sol.objective >= prune_threshold():
                closed_bound = min(closed_bound, sol.objective)
                break
            j = _most_fractional(sol.values, int_cols, opts.integrality_tol)
            if j < 0:
                accept_incumbent(sol.values)
                break
            stop_status = out_of_budget()
            if stop_status:
                push(sol.objective, fixings)
                break
            dive_val = 1.0 if sol.values[j] >= 0.5 else 0.0
            other = dict(fixings)
            other[j] = 1.0 - dive_val
            push(sol.objective, other)
            fixings = dict(fixings)
            fixings[j] = dive_val
        if stop_status:
            break

    wall = time.monotonic() - t0
    open_bounds = [b for b, _, _ in heap]
    if best_values is None:
        if stop_status:
            return SolveResult(stop_status, None, min(open_bounds, default=np.inf),
                               None, nodes, wall, model)
        return SolveResult(SolveStatus.INFEASIBLE, None, np.inf, None, nodes, wall, model)
    bound = min([best_obj, closed_bound] + open_bounds)
    status = stop_status or SolveStatus.OPTIMAL
    return SolveResult(status, best_obj, bound, best_values, nodes, wall, model)
