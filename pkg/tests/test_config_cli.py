import json
import os

import numpy as np
import pytest

from finray_qd.cli import main
from finray_qd.config import RunConfig, config_from_dict, config_to_dict, parse_config
from finray_qd.design import benchmark_design, to_json
from finray_qd.errors import ConfigError
from finray_qd.grasp import ObjectSet, RigidObjectSpec, save_object_set


class TestConfig:
    def test_defaults_match_experiment_scale(self):
        cfg = RunConfig()
        assert cfg.generations == 5
        assert cfg.batch == 15
        assert cfg.archive_rows == cfg.archive_cols == 20
        assert cfg.sim.cg_tol == 1e-6
        assert cfg.sim.cg_maxiter == 1000

    def test_parse_and_sections(self):
        cfg = parse_config("""
        # a comment
        seed = 9
        generations = 2
        batch = 4
        qd.archive_rows = 10
        sim.dt = 0.01
        eval.clearance = 2.0
        """)
        assert cfg.seed == 9
        assert cfg.archive_rows == 10
        assert cfg.sim.dt == 0.01
        assert cfg.eval.clearance == 2.0
        assert cfg.eval.sim.dt == 0.01         # eval carries the sim overrides

    def test_unknown_key_line_precise(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("seed = 1\nqd.bogus = 2\n")
        assert exc.value.line == 2

    def test_bad_value_line_precise(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("seed = 1\n\nsim.dt = fast\n")
        assert exc.value.line == 3

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("seed 1\n")
        assert exc.value.line == 1

    def test_invariants_enforced(self):
        with pytest.raises(ConfigError):
            parse_config("generations = 0\n")
        with pytest.raises(ConfigError):
            parse_config("batch = 1\n")

    def test_echo_round_trip(self):
        cfg = parse_config("seed = 3\nsim.self_contact = false\nsim.gravity = 0.0,-9810.0\n")
        echo = config_to_dict(cfg)
        cfg2 = config_from_dict(echo)
        assert config_to_dict(cfg2) == echo
        assert cfg2.sim.self_contact is False
        assert cfg2.sim.gravity == (0.0, -9810.0)


@pytest.fixture(scope="module")
def small_objects_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("objs") / "objects.json"
    objs = ObjectSet(objects=(
        RigidObjectSpec("ball", "sphere", {"radius": 12.0}, 0.05),
    ))
    save_object_set(objs, path)
    return str(path)


@pytest.fixture(scope="module")
def fast_cfg_text(small_objects_path):
    return f"""
seed = 11
generations = 1
batch = 2
objects = {small_objects_path}
sim.h_min = 1.5
sim.h_max = 4.0
sim.dt = 0.01
sim.grip_time = 0.5
sim.settle_max_steps = 100
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, fast_cfg_text):
    out = tmp_path_factory.mktemp("run")
    cfg_path = out / "run.cfg"
    cfg_path.write_text(fast_cfg_text + f"out_dir = {out}/results\n")
    code = main(["optimize", str(cfg_path)])
    assert code == 0
    return str(out / "results")


class TestOptimize:
    def test_outputs_exist(self, run_dir):
        for name in ("archive.csv", "metrics.csv", "runlog.json", "heatmap.svg"):
            assert os.path.exists(os.path.join(run_dir, name))

    def test_runlog_counts(self, run_dir):
        with open(os.path.join(run_dir, "runlog.json")) as fh:
            log = json.load(fh)
        assert len(log["evaluations"]) == 1 * 2     # generations * batch
        assert len(log["generations"]) == 1
        assert log["total_wall_time"] > 0

    def test_metrics_csv_non_decreasing(self, run_dir):
        lines = open(os.path.join(run_dir, "metrics.csv")).read().splitlines()
        assert lines[0] == "generation,evaluations,coverage,qd_score,best"
        cov = [float(l.split(",")[2]) for l in lines[1:]]
        assert all(b >= a for a, b in zip(cov, cov[1:]))

    def test_same_seed_byte_identical(self, tmp_path, fast_cfg_text):
        outputs = []
        for run in ("a", "b"):
            cfg_path = tmp_path / f"{run}.cfg"
            cfg_path.write_text(fast_cfg_text + f"out_dir = {tmp_path}/{run}\n")
            assert main(["optimize", str(cfg_path)]) == 0
            outputs.append((tmp_path / run / "archive.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_heatmap_svg_cell_count(self, run_dir):
        svg = open(os.path.join(run_dir, "heatmap.svg")).read()
        assert svg.count('class="cell"') == 20 * 20

    def test_missing_config_exit_2(self):
        assert main(["optimize", "/nonexistent/path.cfg"]) == 2

    def test_malformed_config_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("seed = 1\nsim.warp_speed = 9\n")
        assert main(["optimize", str(bad)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_env_var_overrides_config_path(self, tmp_path, fast_cfg_text, monkeypatch):
        cfg_path = tmp_path / "env.cfg"
        cfg_path.write_text(fast_cfg_text + f"out_dir = {tmp_path}/envrun\n")
        monkeypatch.setenv("FINRAY_QD_CONFIG", str(cfg_path))
        assert main(["optimize"]) == 0
        assert os.path.exists(tmp_path / "envrun" / "archive.csv")


class TestEvaluate:
    def test_benchmark_prints_parameters_and_rate(self, tmp_path, capsys,
                                                  small_objects_path):
        code = main(["evaluate", "--benchmark", "--objects", small_objects_path,
                     "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "H=94.5" in out and "d_mount=35.0" in out
        assert "success_rate:" in out
        matrix = (tmp_path / "success_matrix.csv").read_text().splitlines()
        assert matrix[0] == "design,ball,success_rate"
        entries = matrix[1].split(",")
        assert float(entries[-1]) == np.mean([int(x) for x in entries[1:-1]])

    def test_benchmark_alias(self, tmp_path, capsys, small_objects_path):
        code = main(["benchmark", "--objects", small_objects_path,
                     "--out", str(tmp_path)])
        assert code == 0
        assert "success_rate:" in capsys.readouterr().out

    def test_design_file_evaluation(self, tmp_path, small_objects_path, capsys):
        path = tmp_path / "design.json"
        to_json(benchmark_design(32.0), path)
        code = main(["evaluate", "--design", str(path),
                     "--objects", small_objects_path, "--out", str(tmp_path)])
        assert code == 0
        assert "d_mount=32.0" in capsys.readouterr().out

    def test_invalid_design_file_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["evaluate", "--design", str(bad), "--out", str(tmp_path)]) == 2

    def test_empty_object_set_exit_2(self, tmp_path):
        empty = tmp_path / "empty.json"
        empty.write_text("[]")
        assert main(["evaluate", "--benchmark", "--objects", str(empty),
                     "--out", str(tmp_path)]) == 2

    def test_infeasible_design_exit_2(self, tmp_path):
        from finray_qd.design import FingerDesign, GripperDesign

        f = FingerDesign(100, 30, 25, 22, 20.0, 20.0, 3, 2, 0)   # walls overlap
        path = tmp_path / "infeasible.json"
        to_json(GripperDesign(fingers=(f, f, f), d_mount=35.0), path)
        assert main(["evaluate", "--design", str(path), "--out", str(tmp_path)]) == 2


class TestMesh:
    def test_benchmark_meshes_identical(self, tmp_path):
        code = main(["mesh", "benchmark", "--out", str(tmp_path)])
        assert code == 0
        contents = [(tmp_path / f"finger_{i}.obj").read_bytes() for i in (1, 2, 3)]
        assert contents[0] == contents[1] == contents[2]
        report = json.loads((tmp_path / "mesh_report.json").read_text())
        assert report["finger_1"]["min_edge"] >= 0.5    # h_min / 2
        assert report["finger_1"]["n_triangles"] > 100

    def test_design_file_mesh(self, tmp_path):
        path = tmp_path / "design.json"
        to_json(benchmark_design(), path)
        assert main(["mesh", str(path), "--out", str(tmp_path / "meshes")]) == 0

    def test_geometry_failure_exit_1(self, tmp_path):
        from finray_qd.design import FingerDesign, GripperDesign

        f = FingerDesign(100, 30, 25, 150.0, 2, 2, 3, 2, 0)     # tip too long
        path = tmp_path / "broken.json"
        to_json(GripperDesign(fingers=(f, f, f), d_mount=35.0), path)
        assert main(["mesh", str(path), "--out", str(tmp_path)]) == 1


class TestReplay:
    def test_replay_fresh_cells_exit_0(self, run_dir, capsys):
        from finray_qd.qd import ArchiveGrid

        archive = ArchiveGrid.from_csv(os.path.join(run_dir, "archive.csv"))
        assert archive.cells
        for (i, j) in sorted(archive.cells):
            code = main(["replay", os.path.join(run_dir, "archive.csv"),
                         str(i), str(j)])
            assert code == 0
        assert "reproduced" in capsys.readouterr().out

    def test_replay_empty_cell_exit_1(self, run_dir):
        code = main(["replay", os.path.join(run_dir, "archive.csv"), "19", "0"])
        assert code == 1

    def test_replay_tampered_objective_exit_3(self, run_dir, tmp_path):
        import shutil

        tampered = tmp_path / "tampered"
        shutil.copytree(run_dir, tampered)
        path = tampered / "archive.csv"
        lines = path.read_text().splitlines()
        parts = lines[1].split(",")
        parts[4] = "0.123456789"
        lines[1] = ",".join(parts)
        path.write_text("\n".join(lines) + "\n")
        code = main(["replay", str(path), parts[0], parts[1]])
        assert code == 3

    def test_replay_missing_file_exit_2(self):
        assert main(["replay", "/nope/archive.csv", "0", "0"]) == 2
