"""Brute-force reference planner for small meshes.

Enumerates every admissible simple path with depth-first search, then scores
each one with a dynamic program over a discretized velocity grid. The result
upper-bounds the true minimum time (the grid profile is feasible), while the
relaxed model lower-bounds it, which brackets both against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# K x K feasibility scaffolding depends only on the grid, not on edge data
_GRID_CACHE = {}


def enumerate_paths(mesh, table, start, goal, max_nodes=14):
    """All simple admissible paths from start to goal, in DFS order.

    Admissible means every edge passes the per-edge pitch test and no
    consecutive pair is forbidden. Paths end at their first visit to the
    goal. Meshes beyond max_nodes vertices are refused outright because the
    search is exponential.
    """
    if mesh.n_vertices > max_nodes:
        raise ValueError(
            f"mesh has {mesh.n_vertices} vertices; enumeration is capped at "
            f"{max_nodes} (raise max_nodes explicitly to override)"
        )
    heads = mesh.heads
    paths = []
    visited = np.zeros(mesh.n_vertices, dtype=bool)
    visited[start] = True
    trail = [start]

    def descend(node, last_edge):
        if node == goal:
            paths.append(list(trail))
            return
        for e in mesh.out_edges[node]:
            e = int(e)
            if not table.pitch_ok[e]:
                continue
            if last_edge is not None and table.is_forbidden(last_edge, e):
                continue
            nxt = int(heads[e])
            if visited[nxt]:
                continue
            visited[nxt] = True
            trail.append(nxt)
            descend(nxt, e)
            trail.pop()
            visited[nxt] = False

    descend(start, None)
    return paths


def _grid_tables(k, v_min, v_max):
    key = (k, float(v_min), float(v_max))
    cached = _GRID_CACHE.get(key)
    if cached is None:
        grid = np.linspace(v_min, v_max, k)
        sq = grid ** 2
        dsq = np.abs(sq[None, :] - sq[:, None])   # |v_next^2 - v_prev^2|
        vsum = grid[None, :] + grid[:, None]
        cached = (grid, dsq, vsum)
        if len(_GRID_CACHE) > 8:
            _GRID_CACHE.clear()
        _GRID_CACHE[key] = cached
    return cached


def optimal_profile_dp(mesh, path, limits, k=201):
    """Minimum traversal time of a fixed node path on a velocity grid.

    Velocities live on a uniform k-point grid over [v_min, v_max]; boundary
    velocities snap to the nearest grid point. Each edge enforces the
    acceleration window |v_b^2 - v_a^2| <= 2 d a_max and costs 2 d / (v_a + v_b).
    Returns (velocities, time); (None, inf) when no feasible profile exists.
    """
    nodes = list(path)
    if len(nodes) < 2:
        raise ValueError("path needs at least two nodes")
    length_of = {}
    for t, h, d in zip(mesh.tails, mesh.heads, mesh.lengths):
        length_of[(int(t), int(h))] = float(d)
    try:
        dists = [length_of[(nodes[i], nodes[i + 1])] for i in range(len(nodes) - 1)]
    except KeyError as exc:
        raise ValueError(f"path step {exc.args[0]} is not a mesh edge") from None
    grid, dsq, vsum = _grid_tables(k, limits.v_min, limits.v_max)
    start_idx = int(np.argmin(np.abs(grid - limits.kappa)))
    goal_idx = int(np.argmin(np.abs(grid - limits.gamma)))

    cost = np.full(k, np.inf)
    cost[start_idx] = 0.0
    choices = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for d in dists:
            step = np.where(
                (dsq <= 2.0 * d * limits.a_max) & (vsum > 0.0),
                2.0 * d / vsum,
                np.inf,
            )
            total = cost[:, None] + step
            prev = np.argmin(total, axis=0)
            cost = total[prev, np.arange(k)]
            choices.append(prev)
    if not np.isfinite(cost[goal_idx]):
        return None, np.inf
    idx = [goal_idx]
    for prev in reversed(choices):
        idx.append(int(prev[idx[-1]]))
    idx.reverse()
    return grid[idx], float(cost[goal_idx])


@dataclass
class OracleResult:
    """Every admissible path with its grid-optimal time, best first by time."""

    paths: list            # node id lists, DFS order
    times: np.ndarray      # (len(paths),) grid-optimal time per path
    best_index: int        # -1 when nothing is feasible
    best_profile: np.ndarray | None
    k: int

    @property
    def best_path(self):
        return None if self.best_index < 0 else self.paths[self.best_index]

    @property
    def best_time(self):
        return np.inf if self.best_index < 0 else float(self.times[self.best_index])


def oracle_best(mesh, table, start, goal, limits, k=201, max_nodes=14):
    """Enumerate paths, score each on the grid, and keep the fastest."""
    paths = enumerate_paths(mesh, table, start, goal, max_nodes=max_nodes)
    times = np.full(len(paths), np.inf)
    best_index = -1
    best_profile = None
    for i, path in enumerate(paths):
        profile, t = optimal_profile_dp(mesh, path, limits, k=k)
        times[i] = t
        if t < (times[best_index] if best_index >= 0 else np.inf):
            best_index = i
            best_profile = profile
    return OracleResult(
        paths=paths,
        times=times,
        best_index=best_index,
        best_profile=best_profile,
        k=k,
    )


def write_paths_csv(result, target):
    lines = ["time,nodes"]
    for path, t in zip(result.paths, result.times):
        lines.append(f"{repr(float(t))},{'-'.join(str(n) for n in path)}")
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as handle:
            handle.write(text)
