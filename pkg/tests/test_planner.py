"""MeshPlanner estimator facade: params, fitting, planning, predict."""

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kinoplan import MeshPlanner, SolveStatus, Trajectory, synth_mesh


@pytest.fixture()
def planner_params():
    return dict(
        theta_max_yaw=math.pi / 2,
        theta_max_pitch=math.pi / 6,
        phi_max=math.pi / 4,
        a_max=0.5,
        v_max=0.9,
        kappa=0.1,
        gamma=0.1,
    )


@pytest.fixture(scope="module")
def sheet():
    return synth_mesh("plane-grid", nx=4, ny=4)


class TestEstimatorContract:
    def test_get_params_round_trip(self, planner_params):
        planner = MeshPlanner(**planner_params)
        params = planner.get_params()
        for name, value in planner_params.items():
            assert params[name] == value
        rebuilt = MeshPlanner(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        planner = MeshPlanner()
        planner.set_params(v_max=0.75, gap_tol=1e-8)
        assert planner.v_max == 0.75
        assert planner.gap_tol == 1e-8
        with pytest.raises(ValueError):
            planner.set_params(warp_speed=9)

    def test_clone_keeps_params_drops_state(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        assert hasattr(planner, "table_")
        fresh = clone(planner)
        assert fresh.get_params() == planner.get_params()
        assert not hasattr(fresh, "table_")

    def test_unfitted_calls_raise(self):
        planner = MeshPlanner()
        with pytest.raises(NotFittedError):
            planner.plan(0, 1)
        with pytest.raises(NotFittedError):
            planner.predict(np.zeros((1, 6)))

    def test_repr_mentions_changed_params(self, planner_params):
        text = repr(MeshPlanner(**planner_params))
        assert text.startswith("MeshPlanner(")
        assert "v_max=0.9" in text

    def test_defaults_match_shared_limits(self):
        from kinoplan import DEFAULT_LIMITS

        assert MeshPlanner()._limits() == DEFAULT_LIMITS


class TestFit:
    def test_fit_from_mesh_object(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        assert planner.mesh_ is sheet
        assert planner.n_admissible_edges_ == sheet.n_edges  # flat sheet
        assert planner.n_forbidden_pairs_ > 0
        assert planner.limits_.v_max == 0.9

    def test_fit_from_file(self, sheet, planner_params, tmp_path):
        from kinoplan import write_off

        path = tmp_path / "sheet.off"
        write_off(sheet, path)
        planner = MeshPlanner(**planner_params).fit(str(path))
        assert planner.mesh_.n_vertices == sheet.n_vertices
        assert planner.plan(0, 3).feasible

    def test_refit_replaces_state(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        first = planner.n_admissible_edges_
        steep = synth_mesh("ridge", nx=4, ny=4, amplitude=3.0)
        planner.fit(steep)
        assert planner.mesh_ is steep
        assert planner.n_admissible_edges_ < first


class TestPlan:
    def test_corner_to_corner(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        result = planner.plan(0, 15)
        assert result.status == SolveStatus.OPTIMAL
        assert result.feasible
        traj = result.trajectory
        assert traj.nodes[0] == 0 and traj.nodes[-1] == 15
        assert result.objective == pytest.approx(traj.total_time_model)
        assert result.gap <= 1e-6
        assert result.pi is not None and result.pi <= 1e-6
        assert result.snap_distances == (0.0, 0.0)
        assert set(result.timings) == {"build", "solve", "extract"}
        assert result.nodes >= 1

    def test_point_snapping(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        result = planner.plan((0.2, -0.1, 0.0), (2.9, 3.2, 0.0))
        assert result.start_node == 0
        assert result.goal_node == 15
        assert result.snap_distances[0] == pytest.approx(math.hypot(0.2, 0.1))
        assert result.snap_distances[1] == pytest.approx(math.hypot(0.1, 0.2))

    def test_matches_vertex_id_query(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        by_id = planner.plan(0, 15)
        by_point = planner.plan((0.0, 0.0, 0.0), (3.0, 3.0, 0.0))
        assert by_id.objective == by_point.objective
        np.testing.assert_array_equal(
            by_id.trajectory.nodes, by_point.trajectory.nodes
        )

    def test_infeasible_query(self, sheet, planner_params):
        # 60 degree yaw budget cannot head northeast out of the corner
        params = dict(planner_params, theta_max_yaw=math.pi / 3)
        planner = MeshPlanner(**params).fit(sheet)
        result = planner.plan(0, 15)
        assert result.status == SolveStatus.INFEASIBLE
        assert not result.feasible
        assert result.trajectory is None
        assert result.pi is None
        assert result.objective is None

    def test_endpoint_validation(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        with pytest.raises(ValueError, match="out of range"):
            planner.plan(0, 99)
        with pytest.raises(ValueError, match="vertex ids or"):
            planner.plan((0.0, 1.0), 3)
        with pytest.raises(ValueError, match="must differ"):
            planner.plan(5, 5)


class TestPredict:
    def test_rows_to_trajectories(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        X = np.array([
            [0.0, 0.0, 0.0, 3.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 3.0, 3.0, 0.0],
        ])
        out = planner.predict(X)
        assert len(out) == 2
        assert all(isinstance(t, Trajectory) for t in out)
        assert out[0].nodes[-1] == 3
        assert out[1].nodes[-1] == 15

    def test_unsolved_rows_are_none(self, sheet, planner_params):
        params = dict(planner_params, theta_max_yaw=math.pi / 3)
        planner = MeshPlanner(**params).fit(sheet)
        X = np.array([
            [0.0, 0.0, 0.0, 3.0, 0.0, 0.0],   # straight east: fine
            [0.0, 0.0, 0.0, 3.0, 3.0, 0.0],   # corner to corner: unreachable
        ])
        out = planner.predict(X)
        assert out[0] is not None
        assert out[1] is None

    def test_shape_validation(self, sheet, planner_params):
        planner = MeshPlanner(**planner_params).fit(sheet)
        with pytest.raises(ValueError, match=r"\(n, 6\) array"):
            planner.predict(np.zeros((2, 5)))
        with pytest.raises(ValueError, match=r"\(n, 6\) array"):
            planner.predict(np.zeros(6))
