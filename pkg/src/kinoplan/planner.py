"""High-level planning facade with a scikit-learn estimator shape."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import InfeasibleRequestError
from .evaluation import constraint_error
from .kinematics import NEAR_ZERO_VELOCITY, KinodynamicLimits, build_transition_table
from .mesh import MeshGraph, nearest_vertex, parse_mesh
from .model import PlanRequest, build_model
from .solver import SolveOptions, SolveStatus, solve_milp
from .trajectory import Trajectory, extract_path


@dataclass
class PlanResult:
    """Everything one plan() call produced."""

    trajectory: Trajectory | None
    status: SolveStatus
    objective: float
    bound: float
    gap: float
    nodes: int                 # branch-and-bound nodes
    start_node: int
    goal_node: int
    snap_distances: tuple      # (start, goal) distance from query point to vertex
    pi: float | None           # constraint error of the trajectory, if any
    timings: dict              # seconds spent in build / solve / extract
    solve_result: object       # full solver output, model included

    @property
    def feasible(self):
        return self.trajectory is not None


class MeshPlanner(BaseEstimator):
    """Minimum-time planner over a triangulated terrain mesh.

    fit() ingests a mesh and precomputes the admissible edge transitions for
    the configured limits; plan() solves a single start/goal query; predict()
    maps rows of (start_xyz, goal_xyz) to trajectories.

    Parameters mirror KinodynamicLimits plus solver knobs. Angles are radians,
    velocities and accelerations SI.
    """

    def __init__(self, theta_max_yaw=math.pi / 3, theta_max_pitch=math.pi / 6,
                 phi_max=math.pi / 4, a_max=0.5, v_max=0.5, v_min=0.0,
                 kappa=NEAR_ZERO_VELOCITY, gamma=NEAR_ZERO_VELOCITY,
                 s_upper=1e6, gap_tol=1e-6, integrality_tol=1e-6,
                 lp_feasibility_tol=1e-9, node_limit=0, time_limit=0.0):
        self.theta_max_yaw = theta_max_yaw
        self.theta_max_pitch = theta_max_pitch
        self.phi_max = phi_max
        self.a_max = a_max
        self.v_max = v_max
        self.v_min = v_min
        self.kappa = kappa
        self.gamma = gamma
        self.s_upper = s_upper
        self.gap_tol = gap_tol
        self.integrality_tol = integrality_tol
        self.lp_feasibility_tol = lp_feasibility_tol
        self.node_limit = node_limit
        self.time_limit = time_limit

    def _limits(self):
        return KinodynamicLimits(
            theta_max_yaw=self.theta_max_yaw,
            theta_max_pitch=self.theta_max_pitch,
            phi_max=self.phi_max,
            a_max=self.a_max,
            v_max=self.v_max,
            v_min=self.v_min,
            kappa=self.kappa,
            gamma=self.gamma,
            s_upper=self.s_upper,
        )

    def _options(self):
        return SolveOptions(
            gap_tol=self.gap_tol,
            integrality_tol=self.integrality_tol,
            lp_feasibility_tol=self.lp_feasibility_tol,
            node_limit=self.node_limit,
            time_limit=self.time_limit,
        )

    def fit(self, mesh, y=None):
        """Bind a mesh (MeshGraph, or a path to an OFF/OBJ file)."""
        if isinstance(mesh, MeshGraph):
            self.mesh_ = mesh
        else:
            self.mesh_ = parse_mesh(mesh)
        self.limits_ = self._limits()
        self.table_ = build_transition_table(self.mesh_, self.limits_)
        self.n_admissible_edges_ = int(self.table_.pitch_ok.sum())
        self.n_forbidden_pairs_ = self.table_.n_forbidden
        return self

    def _require_fitted(self):
        if not hasattr(self, "mesh_"):
            raise NotFittedError(
                "this MeshPlanner instance is not fitted yet; call fit() "
                "with a mesh first"
            )

    def _resolve_endpoint(self, value):
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            node = int(value)
            if not 0 <= node < self.mesh_.n_vertices:
                raise ValueError(f"vertex id {node} out of range")
            return node, 0.0
        point = np.asarray(value, dtype=np.float64)
        if point.shape != (3,):
            raise ValueError("endpoints are vertex ids or (x, y, z) points")
        node = nearest_vertex(self.mesh_, point)
        return node, float(np.linalg.norm(self.mesh_.vertices[node] - point))

    def plan(self, start, goal):
        """Solve one query; endpoints are vertex ids or points to snap."""
        self._require_fitted()
        start_node, snap_start = self._resolve_endpoint(start)
        goal_node, snap_goal = self._resolve_endpoint(goal)
        request = PlanRequest(start_node, goal_node, self.limits_)
        t0 = time.perf_counter()
        model = build_model(self.mesh_, self.table_, request)
        t1 = time.perf_counter()
        result = solve_milp(model, self._options())
        t2 = time.perf_counter()
        trajectory = None
        pi = None
        if result.status in (SolveStatus.OPTIMAL, SolveStatus.GAP_LIMIT):
            trajectory = extract_path(self.mesh_, result)
            pi = constraint_error(trajectory, self.limits_).total
        t3 = time.perf_counter()
        return PlanResult(
            trajectory=trajectory,
            status=result.status,
            objective=result.objective,
            bound=result.bound,
            gap=result.gap,
            nodes=result.nodes,
            start_node=start_node,
            goal_node=goal_node,
            snap_distances=(snap_start, snap_goal),
            pi=pi,
            timings={"build": t1 - t0, "solve": t2 - t1, "extract": t3 - t2},
            solve_result=result,
        )

    def predict(self, X):
        """Trajectories for rows of (start_x, start_y, start_z, goal_x,
        goal_y, goal_z); None marks an unreachable or unsolved query."""
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 6:
            raise ValueError("predict expects an (n, 6) array of start/goal points")
        out = []
        for row in X:
            try:
                result = self.plan(row[:3], row[3:])
            except InfeasibleRequestError:
                out.append(None)
                continue
            out.append(result.trajectory)
        return out
