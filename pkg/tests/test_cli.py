import csv
import json

import pytest

from gprrecon.cli import main
from gprrecon.cloud import read_ply
from gprrecon.migration import read_grid
from gprrecon.scene import read_bscan


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    assert run("simulate", "--count", 4, "--samples", 64, "--seed", 3, "--out", out) == 0
    return out


def test_simulate_demo(tmp_path):
    assert run("simulate", "--out", tmp_path / "a", "--seed", 7) == 0
    assert len(list((tmp_path / "a").glob("line_*.gprb"))) == 11
    assert len(list((tmp_path / "a").glob("truth_line_*.gprc"))) == 11
    assert read_ply(tmp_path / "a" / "dense.ply").shape == (8064, 3)
    assert read_bscan(tmp_path / "a" / "line_00.gprb").amplitudes.shape == (256, 256)
    manifest = json.loads((tmp_path / "a" / "simulate.manifest.json").read_text())
    assert manifest["seed"] == 7 and len(manifest["outputs"]) == 26
    assert {"config_hash", "timings_s", "tool_version", "inputs"} <= set(manifest)


def test_simulate_idempotent(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--out", tmp_path / name, "--seed", 7, "--jitter", 0.002) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir() if not p.name.endswith("manifest.json"))
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    ma = json.loads((tmp_path / "a" / "simulate.manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "simulate.manifest.json").read_text())
    assert ma["config_hash"] == mb["config_hash"]


def test_simulate_count(dataset):
    scenes = sorted(dataset.glob("scene_*"))
    assert len(scenes) == 4
    for d in scenes:
        assert (d / "scene.txt").exists() and (d / "dense.ply").exists()
        assert len(list(d.glob("line_*.gprb"))) == 11


def test_simulate_bad_scene(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("slab 2 2 0.5 6\npipe 1 0 -0.2 1 2\n")
    assert run("simulate", "--scene", bad, "--out", tmp_path / "o") == 3
    assert "bad.txt:2:" in capsys.readouterr().err


def test_migrate_and_export(tmp_path):
    run("simulate", "--out", tmp_path / "s", "--line-spacing", 1.0)
    assert run("migrate", tmp_path / "s", "--truth", tmp_path / "s" / "scene.txt", "--out", tmp_path / "m") == 0
    grids = sorted((tmp_path / "m").glob("*.gprc"))
    assert len(grids) == 3 and read_grid(grids[0]).mask.shape == (128, 128)
    assert run("export", *grids, "--out", tmp_path / "e") == 0
    assert read_ply(tmp_path / "e" / "registered.ply").shape[1] == 3
    assert run("export", tmp_path / "e" / "registered.ply", "--out", tmp_path / "e") == 0
    rows = list(csv.reader(open(tmp_path / "e" / "registered.csv")))
    assert rows[0] == ["x", "y", "z"]
    assert run("migrate", tmp_path / "s", "--out", tmp_path / "m2") == 2


def test_reconstruct_oracle_bpa(tmp_path):
    run("simulate", "--out", tmp_path / "s")
    assert run("reconstruct", tmp_path / "s", "--oracle-bpa", "--truth", tmp_path / "s" / "scene.txt",
               "--out", tmp_path / "r") == 0
    assert read_ply(tmp_path / "r" / "dense.ply").shape == (8064, 3)
    assert read_ply(tmp_path / "r" / "sparse.ply").shape == (1500, 3)
    metrics = json.loads((tmp_path / "r" / "metrics.json").read_text())
    assert {"cd_x1e3", "l1_x100"} <= set(metrics)
    assert metrics["sparse_near_surface"] >= 0.95


def test_reconstruct_needs_model(tmp_path):
    run("simulate", "--out", tmp_path / "s", "--line-spacing", 1.0)
    assert run("reconstruct", tmp_path / "s", "--out", tmp_path / "r") == 2


def test_train_eval_sweep(dataset, tmp_path):
    out = tmp_path / "t"
    assert run("train", "--data", dataset, "--epochs", 1, "--batch-size", 2, "--lr", 1e-3,
               "--n-val", 1, "--n-test", 1, "--out", out) == 0
    rows = list(csv.DictReader(open(out / "train_log.csv")))
    assert len(rows) == 1 and set(rows[0]) == {"step", "train_cd", "val_cd", "lr"}
    split = json.loads((out / "split.json").read_text())
    assert len(split["train"]) == 2 and len(split["test"]) == 1

    assert run("eval", "--data", dataset, "--checkpoint", out / "model.gprn", "--out", tmp_path / "e") == 0
    summary = json.loads((tmp_path / "e" / "eval.json").read_text())
    assert summary["n"] == 4 and summary["cd_x1e3"] > 0

    assert run("noise-sweep", "--data", dataset, "--checkpoint", out / "model.gprn", "--out", tmp_path / "n") == 0
    rows = list(csv.DictReader(open(tmp_path / "n" / "noise_sweep.csv")))
    assert [float(r["noise_std"]) for r in rows] == [0.05, 0.1, 0.2, 0.5]
    assert run("noise-sweep", "--data", dataset, "--oracle-truth", "--levels", 0.01, 0.05, 0.1, 0.2,
               "--out", tmp_path / "n2") == 0
    rows = list(csv.DictReader(open(tmp_path / "n2" / "noise_sweep.csv")))
    assert [float(r["noise_std"]) for r in rows] == [0.01, 0.05, 0.1, 0.2]


def test_eval_perfect_stub(dataset, tmp_path):
    assert run("eval", "--data", dataset, "--oracle-truth", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "eval.json").read_text())
    assert summary["cd_x1e3"] == 0.0 and summary["l1_x100"] == 0.0


def test_eval_empty_dataset(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run("eval", "--data", tmp_path / "empty", "--oracle-truth", "--out", tmp_path / "o") == 3
    assert run("eval", "--data", tmp_path / "empty", "--out", tmp_path / "o") == 3


def test_train_numerical_failure(dataset, tmp_path):
    assert run("train", "--data", dataset, "--epochs", 3, "--batch-size", 1, "--lr", 1e300,
               "--n-val", 0, "--n-test", 0, "--out", tmp_path) == 4
    assert (tmp_path / "model.gprn").exists()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# survey\nline-spacing = 1.0\nsamples 64\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "a") == 0
    assert len(list((tmp_path / "a").glob("line_*.gprb"))) == 3
    assert read_bscan(tmp_path / "a" / "line_00.gprb").amplitudes.shape[0] == 64
    # explicit flags beat the file
    assert run("simulate", "--config", cfg, "--line-spacing", 0.5, "--out", tmp_path / "b") == 0
    assert len(list((tmp_path / "b").glob("line_*.gprb"))) == 5
    cfg.write_text("bogus 1\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "c") == 2


def test_usage_errors(tmp_path):
    assert run("frobnicate") == 2
    assert run("simulate", "--seed", "abc") == 2
    assert run("--version") == 0
