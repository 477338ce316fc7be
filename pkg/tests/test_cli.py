"""End-to-end CLI runs: every subcommand, exit codes, limits plumbing."""

import json
import math

import numpy as np
import pytest

from kinoplan import synth_mesh, write_off
from kinoplan.cli import main
from kinoplan.trajectory import from_json

TWO_TRIANGLE_OFF = """OFF
4 2 0
0 0 0
1 0 0
0 1 0
1 1 0
3 0 1 2
3 1 3 2
"""

BASIC_FLAGS = [
    "--theta-max-yaw", repr(math.pi / 2),
    "--theta-max-pitch", repr(math.pi / 6),
    "--phi-max", repr(math.pi / 4),
    "--a-max", "0.5",
    "--v-max", "0.9",
    "--kappa", "0.1",
    "--gamma", "0.1",
]


@pytest.fixture()
def sheet_off(tmp_path):
    path = tmp_path / "sheet.off"
    write_off(synth_mesh("plane-grid", nx=4, ny=4), path)
    return str(path)


@pytest.fixture()
def square_off(tmp_path):
    path = tmp_path / "square.off"
    path.write_text(TWO_TRIANGLE_OFF)
    return str(path)


class TestPlan:
    def test_straight_run(self, sheet_off, tmp_path, capsys):
        out = tmp_path / "run"
        code = main([
            "--out-dir", str(out), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0", *BASIC_FLAGS,
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "status: optimal" in stdout
        assert "path: 0 -> 1 -> 2 -> 3" in stdout
        traj = from_json((out / "trajectory.json").read_text())
        assert list(traj.nodes) == [0, 1, 2, 3]
        np.testing.assert_allclose(
            traj.node_velocities, [0.1, 0.9, 0.9, 0.1], atol=1e-7
        )
        assert (out / "velocity_profile.csv").read_text().startswith("t,v\n")
        assert (out / "acceleration_profile.csv").read_text().startswith("t,a\n")

    def test_default_limits_used_when_unspecified(self, sheet_off, tmp_path, capsys):
        out = tmp_path / "run"
        code = main([
            "--out-dir", str(out), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0",
        ])
        assert code == 0
        traj = from_json((out / "trajectory.json").read_text())
        # stock v_max is 0.5
        assert np.max(traj.node_velocities) == pytest.approx(0.5, abs=1e-6)

    def test_infeasible_exits_2(self, sheet_off, tmp_path, capsys):
        code = main([
            "--out-dir", str(tmp_path / "x"), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,3,0",
            "--theta-max-yaw", repr(math.pi / 3), *BASIC_FLAGS[2:],
        ])
        assert code == 2
        assert "infeasible" in capsys.readouterr().out

    def test_pi_threshold_gate(self, sheet_off, tmp_path, capsys):
        code = main([
            "--out-dir", str(tmp_path / "x"), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0", *BASIC_FLAGS,
            "--pi-threshold", "-1.0",
        ])
        assert code == 1
        assert "exceeds threshold" in capsys.readouterr().err

    def test_bad_point_exits_1(self, sheet_off, tmp_path, capsys):
        code = main([
            "--out-dir", str(tmp_path / "x"), "plan", "--mesh", sheet_off,
            "--start", "0,0", "--goal", "3,0,0",
        ])
        assert code == 1
        assert "--start must be x,y,z" in capsys.readouterr().err

    def test_missing_mesh_exits_1(self, tmp_path, capsys):
        code = main([
            "--out-dir", str(tmp_path), "plan", "--mesh", "no/such.off",
            "--start", "0,0,0", "--goal", "1,0,0",
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_usage_error_exits_64(self, sheet_off):
        with pytest.raises(SystemExit) as info:
            main(["plan", "--mesh", sheet_off, "--start", "0,0,0"])
        assert info.value.code == 64

    def test_unknown_command_exits_64(self):
        with pytest.raises(SystemExit) as info:
            main(["warp"])
        assert info.value.code == 64


class TestLimitsPlumbing:
    def test_file_then_flag_precedence(self, sheet_off, tmp_path):
        limits_file = tmp_path / "limits.conf"
        limits_file.write_text(
            "# slow profile\n"
            "theta_max_yaw = 1.5707963267948966\n"
            "a_max = 0.5\n"
            "v_max = 0.3\n"
            "kappa = 0.1\n"
            "gamma = 0.1\n"
        )
        out = tmp_path / "file-only"
        assert main([
            "--out-dir", str(out), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0", "--limits", str(limits_file),
        ]) == 0
        traj = from_json((out / "trajectory.json").read_text())
        assert np.max(traj.node_velocities) <= 0.3 + 1e-9

        out = tmp_path / "flag-wins"
        assert main([
            "--out-dir", str(out), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0", "--limits", str(limits_file),
            "--v-max", "0.9",
        ]) == 0
        traj = from_json((out / "trajectory.json").read_text())
        assert np.max(traj.node_velocities) == pytest.approx(0.9, abs=1e-6)

    def test_env_var_source(self, sheet_off, tmp_path, monkeypatch):
        limits_file = tmp_path / "limits.conf"
        limits_file.write_text("v_max = 0.3\nkappa = 0.1\ngamma = 0.1\n")
        monkeypatch.setenv("KINOPLAN_LIMITS", str(limits_file))
        out = tmp_path / "env"
        assert main([
            "--out-dir", str(out), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0",
        ]) == 0
        traj = from_json((out / "trajectory.json").read_text())
        assert np.max(traj.node_velocities) <= 0.3 + 1e-9

    def test_bad_limits_files(self, sheet_off, tmp_path, capsys):
        bad_key = tmp_path / "bad_key.conf"
        bad_key.write_text("warp_factor = 9\n")
        code = main([
            "--out-dir", str(tmp_path), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0", "--limits", str(bad_key),
        ])
        assert code == 1
        assert "unknown limit 'warp_factor'" in capsys.readouterr().err

        no_eq = tmp_path / "no_eq.conf"
        no_eq.write_text("v_max 0.3\n")
        code = main([
            "--out-dir", str(tmp_path), "plan", "--mesh", sheet_off,
            "--start", "0,0,0", "--goal", "3,0,0", "--limits", str(no_eq),
        ])
        assert code == 1
        assert "expected key=value" in capsys.readouterr().err


class TestTransitions:
    def test_writes_tables(self, square_off, tmp_path, capsys):
        out = tmp_path / "tables"
        code = main([
            "--out-dir", str(out), "transitions", "--mesh", square_off,
            *BASIC_FLAGS,
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "edges: 10 directed, 10 admissible" in stdout
        edges = (out / "edges.csv").read_text().splitlines()
        assert edges[0] == "edge_id,tail,head,pitch_rad,pitch_ok"
        assert len(edges) == 11
        pairs = (out / "forbidden_pairs.csv").read_text().splitlines()
        assert pairs[0] == "k,l"

    def test_cache_roundtrip(self, square_off, tmp_path, capsys):
        cache = tmp_path / "table.npz"
        base = ["transitions", "--mesh", square_off, "--cache", str(cache)]
        out = ["--out-dir", str(tmp_path / "t"), "--verbose"]
        assert main(out + base + BASIC_FLAGS) == 0
        assert cache.exists()
        assert "cached to" in capsys.readouterr().err

        assert main(out + base + BASIC_FLAGS) == 0
        assert "cache hit" in capsys.readouterr().err

        # different yaw budget invalidates the cache
        stale_flags = ["--theta-max-yaw", repr(math.pi / 3), *BASIC_FLAGS[2:]]
        assert main(out + base + stale_flags) == 0
        assert "cache stale" in capsys.readouterr().err


class TestExportModel:
    @pytest.mark.parametrize("fmt, head", [("lp", "Minimize"), ("mps", "NAME")])
    def test_formats(self, square_off, tmp_path, fmt, head, capsys):
        out = tmp_path / "models"
        code = main([
            "--out-dir", str(out), "export-model", "--mesh", square_off,
            "--start", "0,0,0", "--goal", "1,1,0", "--format", fmt,
            *BASIC_FLAGS,
        ])
        assert code == 0
        text = (out / f"model.{fmt}").read_text()
        assert text.startswith(head)

    def test_matches_library_export(self, square_off, tmp_path):
        from kinoplan import (
            PlanRequest,
            build_model,
            build_transition_table,
            export_model,
            parse_mesh,
        )
        from kinoplan.kinematics import KinodynamicLimits

        out = tmp_path / "models"
        main([
            "--out-dir", str(out), "export-model", "--mesh", square_off,
            "--start", "0,0,0", "--goal", "1,1,0", *BASIC_FLAGS,
        ])
        mesh = parse_mesh(square_off)
        limits = KinodynamicLimits(
            theta_max_yaw=math.pi / 2, theta_max_pitch=math.pi / 6,
            phi_max=math.pi / 4, a_max=0.5, v_max=0.9, kappa=0.1, gamma=0.1,
        )
        table = build_transition_table(mesh, limits)
        model = build_model(mesh, table, PlanRequest(0, 3, limits))
        assert (out / "model.lp").read_text() == export_model(model, "lp")

    def test_bad_format_exits_64(self, square_off, tmp_path):
        with pytest.raises(SystemExit) as info:
            main([
                "--out-dir", str(tmp_path), "export-model", "--mesh", square_off,
                "--start", "0,0,0", "--goal", "1,1,0", "--format", "sav",
            ])
        assert info.value.code == 64


class TestEval:
    def test_batch_outputs(self, tmp_path, capsys):
        mesh_path = tmp_path / "sheet.off"
        write_off(synth_mesh("plane-grid", nx=3, ny=3), mesh_path)
        sets = tmp_path / "sets.csv"
        sets.write_text(
            "id,theta_max_yaw,theta_max_pitch,phi_max,a_max,v_max,kappa,gamma\n"
            f"wide,{math.pi / 2!r},{math.pi / 6!r},{math.pi / 4!r},0.5,0.9,0.1,0.1\n"
            f"narrow,{math.pi / 3!r},{math.pi / 6!r},{math.pi / 4!r},0.5,0.9,0.1,0.1\n"
        )
        scenarios = tmp_path / "scenarios.csv"
        scenarios.write_text(
            "mesh,start_x,start_y,start_z,goal_x,goal_y,goal_z,constraint_set,runs\n"
            f"{mesh_path},0,0,0,2,2,0,*,2\n"
        )
        out = tmp_path / "eval"
        code = main([
            "--out-dir", str(out), "eval", "--scenarios", str(scenarios),
            "--sets", str(sets),
        ])
        assert code == 0
        assert "rows: 4 (2 solved)" in capsys.readouterr().out
        results = (out / "results.csv").read_text().splitlines()
        assert len(results) == 5
        assert results[0].startswith("mesh,scenario,constraint_set,run,status")
        aggregates = (out / "aggregates.csv").read_text().splitlines()
        assert len(aggregates) == 3


class TestOracle:
    def test_agreement_report(self, square_off, tmp_path, capsys):
        out = tmp_path / "oracle"
        code = main([
            "--out-dir", str(out), "oracle", "--mesh", square_off,
            "--start", "0,0,0", "--goal", "1,1,0", *BASIC_FLAGS,
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "paths enumerated: 2" in stdout
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["planner_status"] == "optimal"
        assert report["planner_path"] == [0, 1, 3]
        assert report["oracle_path"] == [0, 1, 3]
        # relaxation lower bound never exceeds the grid profile time
        assert report["planner_time_model"] <= report["oracle_time"] + 1e-9
        paths = (out / "oracle_paths.csv").read_text().splitlines()
        assert paths[0] == "time,nodes"
        assert len(paths) == 3

    def test_both_infeasible_exits_2(self, tmp_path, capsys):
        mesh_path = tmp_path / "sheet.off"
        write_off(synth_mesh("plane-grid", nx=3, ny=3), mesh_path)
        out = tmp_path / "oracle"
        code = main([
            "--out-dir", str(out), "oracle", "--mesh", str(mesh_path),
            "--start", "0,0,0", "--goal", "2,2,0",
            "--theta-max-yaw", repr(math.pi / 3), *BASIC_FLAGS[2:],
        ])
        assert code == 2
        stdout = capsys.readouterr().out
        assert "oracle best: none feasible" in stdout
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["oracle_time"] is None
        assert report["planner_status"] == "infeasible"
