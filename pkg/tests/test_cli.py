import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gcvt import shapes
from gcvt.cli import main
from gcvt.content.io import read_pgm16, write_ppm
from gcvt.content.metrics import size_cv
from gcvt.content.superpixels import LabelMap
from gcvt.mesh import write_obj


def _mesh_file(tmp_path, mesh, name="m.obj"):
    path = tmp_path / name
    write_obj(path, mesh.vertices, mesh.faces)
    return str(path)


@pytest.fixture
def square(tmp_path):
    return _mesh_file(tmp_path, shapes.grid_mesh(6, 6), "square.obj")


@pytest.fixture
def sphere(tmp_path):
    return _mesh_file(tmp_path, shapes.icosphere(2), "sphere.obj")


def _energies(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["best_energy"]) for r in rows]


def test_gvt_single_generator_on_tetrahedron(tmp_path):
    mesh = _mesh_file(tmp_path, shapes.tetrahedron(), "tet.obj")
    out = tmp_path / "out"
    assert main(["gvt", "--mesh", mesh, "--n-generators", "1", "--out-dir", str(out)]) == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["m"] == 1 and stats["n_branch"] == 0
    for name in ("cells.obj", "cells.mtl", "boundary.obj", "generators.txt", "manifest.json"):
        assert (out / name).exists()


def test_gvt_generator_file(tmp_path, sphere):
    gen = tmp_path / "g.txt"
    gen.write_text("1 0 0\n-1 0 0\n0 1 0\n# comment\n0 0 1\n")
    out = tmp_path / "out"
    assert main(["gvt", "--mesh", sphere, "--generators", str(gen), "--out-dir", str(out)]) == 0
    assert json.loads((out / "stats.json").read_text())["m"] == 4


def test_missing_mesh_names_path(tmp_path, capsys):
    missing = tmp_path / "nowhere.obj"
    code = main(["gvt", "--mesh", str(missing), "--n-generators", "2",
                 "--out-dir", str(tmp_path / "o")])
    assert code != 0
    assert "nowhere.obj" in capsys.readouterr().err


def test_bad_face_reports_line(tmp_path, capsys):
    bad = tmp_path / "broken.obj"
    bad.write_text("v 0 0 0\nv 1 0 0\nf 1 2 9\n")
    code = main(["gvt", "--mesh", str(bad), "--n-generators", "1", "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "broken.obj:3" in capsys.readouterr().err


def test_lloyd_energy_csv_non_increasing(tmp_path, square):
    out = tmp_path / "out"
    code = main(["optimize", "--mesh", square, "--n-generators", "2", "--method", "lloyd-lmds",
                 "--seed", "3", "--out-dir", str(out)])
    assert code == 0
    e = _energies(out / "energy.csv")
    assert len(e) >= 2
    assert all(b <= a * (1 + 1e-6) for a, b in zip(e, e[1:]))
    assert e[-1] < e[0]


def test_mde_zero_generations_emits_initial_best(tmp_path, square):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 0, "M": 6}))
    out = tmp_path / "out"
    code = main(["optimize", "--mesh", square, "--n-generators", "2", "--method", "mde",
                 "--config", str(cfg), "--out-dir", str(out)])
    assert code == 0
    with open(out / "energy.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["generation"] == "0"
    stats = json.loads((out / "stats.json").read_text())
    assert stats["energy"] == pytest.approx(float(rows[0]["best_energy"]))
    mde = json.loads((out / "manifest.json").read_text())["parameters"]["mde"]
    assert set(mde) == {"seed", "N", "M", "lambda", "crossover_rate", "max_iters",
                        "stall_window", "target_energy", "centroid_method", "steiner_level"}


def test_unknown_method_is_usage_error(tmp_path, square, capsys):
    code = main(["optimize", "--mesh", square, "--n-generators", "2", "--method", "gradient",
                 "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "invalid choice" in capsys.readouterr().err


def test_invalid_config_keys_rejected(tmp_path, square, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 5, "bogus": 1}))
    code = main(["optimize", "--mesh", square, "--n-generators", "2", "--method", "lloyd-lmds",
                 "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "bogus" in capsys.readouterr().err


def test_malformed_config_json(tmp_path, square):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{\n  \"max_iters\": ,\n}")
    code = main(["optimize", "--mesh", square, "--n-generators", "2", "--method", "mde",
                 "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert code == 1


def test_iteration_budget_exit_code(tmp_path, sphere):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 1}))
    out = tmp_path / "out"
    code = main(["optimize", "--mesh", sphere, "--n-generators", "6", "--method", "lloyd-lmds",
                 "--config", str(cfg), "--out-dir", str(out)])
    assert code == 3
    assert json.loads((out / "manifest.json").read_text())["parameters"]["exit_code"] == 3


def test_remesh_four_generators_gives_tetrahedron(tmp_path, sphere):
    out = tmp_path / "out"
    code = main(["remesh", "--mesh", sphere, "--n-generators", "4", "--method", "lloyd-lmds",
                 "--seed", "1", "--out-dir", str(out)])
    assert code == 0
    lines = (out / "dual.obj").read_text().splitlines()
    nv = sum(ln.startswith("v ") for ln in lines)
    nf = sum(ln.startswith("f ") for ln in lines)
    assert (nv, nf) == (4, 4)


def test_remesh_two_generators_not_a_triangulation(tmp_path, sphere, capsys):
    out = tmp_path / "out"
    code = main(["remesh", "--mesh", sphere, "--n-generators", "2", "--method", "none",
                 "--out-dir", str(out)])
    assert code == 2
    assert "dual is not a triangulation" in capsys.readouterr().err
    assert not (out / "dual.obj").exists()


def test_remesh_open_cells_not_a_triangulation(tmp_path, capsys):
    mesh = _mesh_file(tmp_path, shapes.genus2_block(1, 0), "g2.obj")
    code = main(["remesh", "--mesh", mesh, "--n-generators", "3", "--method", "none",
                 "--out-dir", str(tmp_path / "o")])
    assert code == 2
    assert "dual is not a triangulation" in capsys.readouterr().err


def test_analyze_reports_topology(tmp_path):
    mesh = _mesh_file(tmp_path, shapes.torus(8, 6), "torus.obj")
    out = tmp_path / "out"
    assert main(["analyze", "--mesh", mesh, "--n-generators", "5", "--out-dir", str(out)]) == 0
    rep = json.loads((out / "analysis.json").read_text())
    assert rep["genus"] == 1 and rep["euler_characteristic"] == 0
    assert rep["tessellation"]["m"] == 5


def _constant_ppm(tmp_path, n=64):
    path = tmp_path / "flat.ppm"
    write_ppm(path, np.full((n, n, 3), 128, dtype=np.uint8))
    return str(path)


def test_superpixel_constant_image(tmp_path):
    img = _constant_ppm(tmp_path)
    out = tmp_path / "out"
    assert main(["superpixel", "--image", img, "--k", "16", "--method", "rcvt",
                 "--out-dir", str(out)]) == 0
    labels = read_pgm16(out / "labels.pgm")
    assert len(np.unique(labels)) == 16
    assert LabelMap(labels).is_connected()
    assert size_cv(labels) < 0.05
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == {"k", "boundary_recall", "underseg_error", "size_cv", "iterations",
                            "energy_final"}
    assert metrics["k"] == 16 and metrics["underseg_error"] is None
    assert (out / "overlay.ppm").exists()


def test_superpixel_k_too_large(tmp_path, capsys):
    img = tmp_path / "tiny.ppm"
    write_ppm(img, np.zeros((4, 4, 3), dtype=np.uint8))
    code = main(["superpixel", "--image", str(img), "--k", "17", "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "17" in capsys.readouterr().err


def test_superpixel_deterministic(tmp_path):
    rng = np.random.default_rng(0)
    img = tmp_path / "noise.ppm"
    write_ppm(img, rng.integers(0, 256, (40, 48, 3), dtype=np.uint8))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["superpixel", "--image", str(img), "--k", "12", "--method", "imslic",
                     "--seed", "5", "--out-dir", str(out)]) == 0
        outs.append((out / "labels.pgm").read_bytes())
    assert outs[0] == outs[1]


def test_superpixel_ground_truth_metrics(tmp_path):
    rgb = np.zeros((64, 64, 3), dtype=np.uint8)
    rgb[:, 32:] = 200
    img = tmp_path / "two.ppm"
    write_ppm(img, rgb)
    gt = np.zeros((64, 64, 3), dtype=np.uint8)
    gt[:, 31:33] = 255
    gtp = tmp_path / "gt.ppm"
    write_ppm(gtp, gt)
    out = tmp_path / "out"
    assert main(["superpixel", "--image", str(img), "--ground-truth", str(gtp), "--k", "8",
                 "--method", "imslic", "--lambda2", "1", "--out-dir", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["boundary_recall"] == 1.0
    assert metrics["underseg_error"] is not None


def test_supervoxel_outputs(tmp_path):
    frames = tmp_path / "frames"
    frames.mkdir()
    for i in range(4):
        write_ppm(frames / f"frame_{i:03d}.ppm", np.full((24, 24, 3), 90, dtype=np.uint8))
    out = tmp_path / "out"
    assert main(["supervoxel", "--frames", str(frames), "--k", "8", "--out-dir", str(out)]) == 0
    labels = np.stack([read_pgm16(p) for p in sorted((out / "labels").glob("*.pgm"))])
    assert labels.shape == (4, 24, 24)
    assert len(list((out / "overlay").glob("*.ppm"))) == 4
    assert LabelMap(labels).is_connected()


def test_replay_reproduces_stats(tmp_path, sphere):
    out = tmp_path / "out"
    assert main(["optimize", "--mesh", sphere, "--n-generators", "5", "--method", "mde",
                 "--seed", "7", "--out-dir", str(out)]) == 0
    again = tmp_path / "again"
    assert main(["replay", str(out / "manifest.json"), "--out-dir", str(again)]) == 0
    assert (out / "stats.json").read_bytes() == (again / "stats.json").read_bytes()
    assert (out / "energy.csv").read_bytes() == (again / "energy.csv").read_bytes()


def test_replay_detects_changed_input(tmp_path, square):
    out = tmp_path / "out"
    assert main(["gvt", "--mesh", square, "--n-generators", "2", "--out-dir", str(out)]) == 0
    with open(square, "a") as fh:
        fh.write("# edited\n")
    assert main(["replay", str(out)]) == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gcvt.cli", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "gcvt" in r.stdout
