import math

import numpy as np
import pytest

from kinoplan import (
    InfeasibleRequestError,
    KinodynamicLimits,
    MeshGraph,
    PlanRequest,
    build_model,
    build_transition_table,
)


def limits(**kw):
    base = dict(
        theta_max_yaw=math.pi / 2,
        theta_max_pitch=math.pi / 6,
        phi_max=math.pi / 4,
        a_max=0.5,
        v_max=0.9,
        kappa=0.1,
        gamma=0.1,
    )
    base.update(kw)
    return KinodynamicLimits(**base)


def build(mesh, lim, start, goal, **kw):
    table = build_transition_table(mesh, lim)
    return build_model(mesh, table, PlanRequest(start, goal, lim), **kw), table


def entries_by_name(model, row_name):
    r = model.row_names.index(row_name)
    cols, vals = model.row_entries(r)
    return {model.var_names[c]: v for c, v in zip(cols, vals)}, r


class TestStructure:
    def test_counts(self, two_triangle_mesh):
        lim = limits()
        model, table = build(two_triangle_mesh, lim, 0, 3)
        m = int(table.pitch_ok.sum())      # admissible directed edges
        k = 4                              # all nodes retained on a flat mesh
        f = table.n_forbidden
        assert m == 10
        assert model.n_vars == 5 * m + k
        assert model.n_rows == k + f + 13 * m + 2
        counts = model.family_counts()
        assert counts["flow"] == k
        assert counts["curvature"] == f
        assert counts["coupling"] == m
        assert counts["hmc"] == 4 * m
        assert counts["svmc"] == 4 * m
        assert counts["acmc"] == 4 * m
        assert counts["boundary"] == 2

    def test_counts_with_inadmissible_edges(self):
        vertices = np.array([
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 2.0],   # steep edges to vertex 3
        ])
        mesh = MeshGraph(vertices, np.array([[0, 1, 2], [1, 3, 2]]))
        lim = limits()
        model, table = build(mesh, lim, 0, 1)
        m = int(table.pitch_ok.sum())
        assert m == 6  # 1-3 and 2-3 dropped in both directions
        # vertex 3 is isolated and dropped, leaving 3 flow rows
        assert model.family_counts()["flow"] == 3
        assert model.n_vars == 5 * m + 3

    def test_variable_bounds(self, two_triangle_mesh):
        lim = limits()
        model, table = build(two_triangle_mesh, lim, 0, 3)
        meta = model.meta
        x = model.columns_of("edge_use")
        vn = model.columns_of("node_speed")
        ve = model.columns_of("edge_speed")
        s = model.columns_of("edge_slowness")
        h = model.columns_of("used_slowness")
        lam = model.columns_of("speed_sq_delta")
        assert model.is_integer[x].all()
        assert not model.is_integer[np.concatenate([vn, ve, s, h, lam])].any()
        np.testing.assert_array_equal(model.lower[x], 0.0)
        np.testing.assert_array_equal(model.upper[x], 1.0)
        np.testing.assert_array_equal(model.lower[vn], lim.v_min)
        np.testing.assert_array_equal(model.upper[vn], lim.v_max)
        np.testing.assert_array_equal(model.lower[ve], 0.0)
        np.testing.assert_array_equal(model.upper[ve], lim.v_max)
        np.testing.assert_array_equal(model.lower[s], 1.0 / lim.v_max)
        np.testing.assert_array_equal(model.upper[s], lim.s_upper)
        np.testing.assert_array_equal(model.lower[h], 0.0)
        np.testing.assert_array_equal(model.upper[h], np.inf)
        # squared-speed change: lower is the envelope floor, upper the
        # per-edge acceleration cap 2 d a_max
        np.testing.assert_allclose(
            model.lower[lam], -2.0 * lim.v_max * (lim.v_max - lim.v_min)
        )
        np.testing.assert_allclose(
            model.upper[lam], 2.0 * meta["lengths"] * lim.a_max
        )

    def test_objective_is_length_weighted_h(self, two_triangle_mesh):
        lim = limits()
        model, _ = build(two_triangle_mesh, lim, 0, 3)
        h = model.columns_of("used_slowness")
        np.testing.assert_allclose(model.objective[h], model.meta["lengths"])
        mask = np.ones(model.n_vars, dtype=bool)
        mask[h] = False
        assert (model.objective[mask] == 0.0).all()


class TestRowAlgebra:
    """Hand-derived coefficients for v_max = 0.9, v_min = 0, s_upper = 1e6."""

    S_LO = 1.0 / 0.9

    @pytest.fixture
    def model(self, two_triangle_mesh):
        model, _ = build(two_triangle_mesh, limits(), 0, 3)
        return model

    def test_flow_rows(self, model):
        # vertex 0: out 0->1, 0->2 (edges 0, 2); in 1->0, 2->0 (edges 1, 3)
        terms, r = entries_by_name(model, "flow_n0")
        assert terms == {"x_e0": 1.0, "x_e2": 1.0, "x_e1": -1.0, "x_e3": -1.0}
        assert model.senses[r] == "E"
        assert model.rhs[r] == 1.0  # vertex 0 is the start
        terms, r = entries_by_name(model, "flow_n3")
        assert model.rhs[r] == -1.0
        terms, r = entries_by_name(model, "flow_n1")
        assert model.rhs[r] == 0.0

    def test_curvature_row(self, model):
        # U-turn on edge 0: x_e0 + x_e1 <= 1
        terms, r = entries_by_name(model, "curv_e0_e1")
        assert terms == {"x_e0": 1.0, "x_e1": 1.0}
        assert model.senses[r] == "L"
        assert model.rhs[r] == 1.0

    def test_coupling_row(self, model):
        terms, r = entries_by_name(model, "cpl_e0")
        assert terms == {"v_e0": 2.0, "v_n0": -1.0, "v_n1": -1.0}
        assert model.senses[r] == "E"
        assert model.rhs[r] == 0.0

    def test_h_envelope_rows(self, model):
        terms, r = entries_by_name(model, "hmc1_e0")
        assert terms == pytest.approx({"x_e0": self.S_LO, "h_e0": -1.0})
        assert model.senses[r] == "L" and model.rhs[r] == 0.0
        terms, r = entries_by_name(model, "hmc2_e0")
        assert terms == pytest.approx({"h_e0": 1.0, "x_e0": -1e6})
        assert model.senses[r] == "L" and model.rhs[r] == 0.0
        terms, r = entries_by_name(model, "hmc3_e0")
        assert terms == pytest.approx({"s_e0": 1.0, "x_e0": 1e6, "h_e0": -1.0})
        assert model.senses[r] == "L" and model.rhs[r] == 1e6
        terms, r = entries_by_name(model, "hmc4_e0")
        assert terms == pytest.approx(
            {"h_e0": 1.0, "s_e0": -1.0, "x_e0": -self.S_LO}
        )
        assert model.senses[r] == "L" and model.rhs[r] == pytest.approx(-self.S_LO)

    def test_reciprocal_envelope_rows(self, model):
        # with v_min = 0 the s coefficient drops out of rows 1 and 3
        terms, r = entries_by_name(model, "svmc1_e0")
        assert terms == pytest.approx({"v_e0": self.S_LO})
        assert model.senses[r] == "L" and model.rhs[r] == pytest.approx(1.0)
        terms, r = entries_by_name(model, "svmc2_e0")
        assert terms == pytest.approx({"v_e0": 1e6, "s_e0": 0.9})
        assert model.senses[r] == "L" and model.rhs[r] == pytest.approx(1.0 + 9e5)
        terms, r = entries_by_name(model, "svmc3_e0")
        assert terms == pytest.approx({"v_e0": 1e6})
        assert model.senses[r] == "G" and model.rhs[r] == pytest.approx(1.0)
        terms, r = entries_by_name(model, "svmc4_e0")
        assert terms == pytest.approx({"v_e0": self.S_LO, "s_e0": 0.9})
        assert model.senses[r] == "G" and model.rhs[r] == pytest.approx(2.0)

    def test_acceleration_envelope_rows(self, model):
        # mu in [-0.9, 0.9], rho in [0, 1.8]; edge 0 runs 0 -> 1
        terms, r = entries_by_name(model, "acmc1_e0")
        assert terms == pytest.approx({"lam_e0": 1.0, "v_n0": 0.9, "v_n1": 0.9})
        assert model.senses[r] == "G" and model.rhs[r] == pytest.approx(0.0)
        terms, r = entries_by_name(model, "acmc2_e0")
        assert terms == pytest.approx({"lam_e0": 1.0, "v_n0": 0.9, "v_n1": -2.7})
        assert model.senses[r] == "G" and model.rhs[r] == pytest.approx(-1.62)
        terms, r = entries_by_name(model, "acmc3_e0")
        assert terms == pytest.approx({"lam_e0": 1.0, "v_n0": -0.9, "v_n1": -0.9})
        assert model.senses[r] == "L" and model.rhs[r] == pytest.approx(0.0)
        terms, r = entries_by_name(model, "acmc4_e0")
        assert terms == pytest.approx({"lam_e0": 1.0, "v_n0": 2.7, "v_n1": -0.9})
        assert model.senses[r] == "L" and model.rhs[r] == pytest.approx(1.62)

    def test_boundary_rows(self, model):
        terms, r = entries_by_name(model, "vstart")
        assert terms == {"v_n0": 1.0}
        assert model.senses[r] == "E" and model.rhs[r] == pytest.approx(0.1)
        terms, r = entries_by_name(model, "vgoal")
        assert terms == {"v_n3": 1.0}
        assert model.rhs[r] == pytest.approx(0.1)


def feasible_assignment(mesh, model, path, node_v, off_v=0.3):
    """Exact (non-relaxed) assignment for a path with given node velocities."""
    meta = model.meta
    edge_ids = meta["edge_ids"]
    tails, heads = meta["tails"], meta["heads"]
    epos = {int(e): i for i, e in enumerate(edge_ids)}
    on_path = {}
    for a, b in zip(path, path[1:]):
        matches = [int(e) for e in edge_ids
                   if tails[epos[int(e)]] == a and heads[epos[int(e)]] == b]
        on_path[(a, b)] = matches[0]
    v_of = {int(n): off_v for n in meta["node_ids"]}
    for node, v in zip(path, node_v):
        v_of[node] = v
    x = np.zeros(len(edge_ids))
    for e in on_path.values():
        x[epos[e]] = 1.0
    v_n = np.array([v_of[int(n)] for n in meta["node_ids"]])
    v_e = np.array([
        0.5 * (v_of[int(tails[i])] + v_of[int(heads[i])])
        for i in range(len(edge_ids))
    ])
    s = 1.0 / v_e
    h = s * x
    lam = np.array([
        v_of[int(heads[i])] ** 2 - v_of[int(tails[i])] ** 2
        for i in range(len(edge_ids))
    ])
    return np.concatenate([x, v_n, v_e, s, h, lam])


class TestSoundness:
    """Any truly feasible motion satisfies the relaxation."""

    def test_random_feasible_profiles_satisfy_all_rows(self, strip_mesh):
        lim = limits(theta_max_yaw=math.pi / 3)
        rng = np.random.default_rng(7)
        path = [0, 1, 2, 3, 4]  # straight south edge of the strip
        model, _ = build(strip_mesh, lim, 0, 4)
        for _ in range(25):
            # random profile respecting |dv^2| <= 2 d a_max with d = 1
            v = [lim.kappa]
            for _ in range(3):
                lo = math.sqrt(max(v[-1] ** 2 - 2 * lim.a_max, 0.04))
                hi = math.sqrt(min(v[-1] ** 2 + 2 * lim.a_max, lim.v_max ** 2))
                v.append(rng.uniform(lo, hi))
            # the last step must be able to land on gamma
            if abs(lim.gamma ** 2 - v[-1] ** 2) > 2 * lim.a_max:
                v[-1] = math.sqrt(lim.gamma ** 2 + 2 * lim.a_max) - 1e-9
            v.append(lim.gamma)
            values = feasible_assignment(strip_mesh, model, path, v)
            assert model.max_violation(values) <= 1e-9

    def test_violated_assignment_detected(self, strip_mesh):
        lim = limits()
        model, _ = build(strip_mesh, lim, 0, 4)
        values = feasible_assignment(
            strip_mesh, model, [0, 1, 2, 3, 4], [0.1, 0.5, 0.8, 0.5, 0.1]
        )
        lam = model.columns_of("speed_sq_delta")
        bad = np.array(values)
        bad[lam[0]] += 5.0  # push the first edge's lambda beyond its cap
        assert model.max_violation(bad) > 1.0


class TestBuildErrors:
    def test_same_endpoints(self, two_triangle_mesh):
        lim = limits()
        table = build_transition_table(two_triangle_mesh, lim)
        with pytest.raises(ValueError, match="differ"):
            build_model(two_triangle_mesh, table, PlanRequest(1, 1, lim))

    def test_out_of_range(self, two_triangle_mesh):
        lim = limits()
        table = build_transition_table(two_triangle_mesh, lim)
        with pytest.raises(ValueError, match="range"):
            build_model(two_triangle_mesh, table, PlanRequest(0, 9, lim))

    def test_isolated_endpoint(self):
        vertices = np.array([
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 9.0],   # spike: all edges to vertex 3 are steep
        ])
        mesh = MeshGraph(vertices, np.array([[0, 1, 3], [1, 2, 3], [0, 3, 2]]))
        lim = limits()
        table = build_transition_table(mesh, lim)
        with pytest.raises(InfeasibleRequestError, match="goal"):
            build_model(mesh, table, PlanRequest(0, 3, lim))


class TestModelEquality:
    def test_same_build_equal(self, two_triangle_mesh):
        lim = limits()
        a, _ = build(two_triangle_mesh, lim, 0, 3)
        b, _ = build(two_triangle_mesh, lim, 0, 3)
        assert a == b

    def test_different_request_not_equal(self, two_triangle_mesh):
        lim = limits()
        a, _ = build(two_triangle_mesh, lim, 0, 3)
        b, _ = build(two_triangle_mesh, lim, 3, 0)
        assert a != b

    def test_gate_flag_changes_model(self, two_triangle_mesh):
        lim = limits()
        a, _ = build(two_triangle_mesh, lim, 0, 3)
        g, _ = build(two_triangle_mesh, lim, 0, 3, gate_acceleration=True)
        assert a != g
        assert "accap" in g.family_counts()
        m = len(a.meta["edge_ids"])
        assert g.n_rows == a.n_rows + m
        assert np.isposinf(g.upper[g.columns_of("speed_sq_delta")]).all()
