import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from blastoformer.cli import main
from blastoformer.data import parse_probe_file
from blastoformer.data.io import read_field
from blastoformer.data.probes import probe_locations, write_probe_file
from blastoformer.scene import GridSpec, sample_scenario

TINY_BOF = {"model": {"patch_size": 3, "input_embed": 8, "seq_embed": 16, "encoder_layers": 1,
                      "heads": 2, "rff_dim": 4},
            "train": {"max_epochs": 3, "early_stop_patience": 3, "batch_size": 8},
            "unscaler": {"max_epochs": 2, "early_stop_patience": 2}}


def digest(path):
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(f.relative_to(path)).encode())
            h.update(f.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    w = tmp_path_factory.mktemp("cli")
    assert run("gen-data", "--n", 20, "--seed", 3, "--grid-side", 9, "--out", w / "data") == 0
    (w / "cfg.json").write_text(json.dumps(TINY_BOF))
    assert run("train", "--model", "blastoformer", "--data", w / "data", "--config", w / "cfg.json",
               "--out", w / "m.ckpt") == 0
    return w


def test_gen_data_byte_reproducible(workspace, tmp_path):
    assert run("gen-data", "--n", 20, "--seed", 3, "--grid-side", 9, "--out", tmp_path / "d") == 0
    assert digest(tmp_path / "d") == digest(workspace / "data")
    assert run("gen-data", "--n", 20, "--seed", 4, "--grid-side", 9, "--out", tmp_path / "e") == 0
    assert digest(tmp_path / "e") != digest(workspace / "data")


def test_gen_cases_byte_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("gen-cases", "--n", 2, "--seed", 5, "--grid-side", 9, "--out", tmp_path / name) == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["case_00000", "case_00001"]


def test_parse_probes_command(tmp_path):
    g = GridSpec.square(9)
    loc = probe_locations(g)
    vals = np.random.default_rng(0).uniform(1e5, 2e5, size=(4, len(loc)))
    (tmp_path / "p").write_text(write_probe_file(loc, np.arange(4) * 1e-4, vals))
    for name in ("f1.bin", "f2.bin"):
        assert run("parse-probes", "--file", tmp_path / "p", "--grid-side", 9, "--out", tmp_path / name) == 0
    assert (tmp_path / "f1.bin").read_bytes() == (tmp_path / "f2.bin").read_bytes()
    field = read_field(tmp_path / "f1.bin")
    # field files store float32
    assert np.array_equal(field, parse_probe_file((tmp_path / "p").read_text(), g).astype(np.float32))
    assert np.array_equal(field.reshape(-1), vals.max(axis=0).astype(np.float32))


def test_train_byte_reproducible(workspace, tmp_path):
    assert run("train", "--model", "blastoformer", "--data", workspace / "data", "--config",
               workspace / "cfg.json", "--out", tmp_path / "again.ckpt") == 0
    assert digest(tmp_path / "again.ckpt") == digest(workspace / "m.ckpt")
    assert digest(tmp_path / "again_history.csv") == digest(workspace / "m_history.csv")


@pytest.mark.parametrize("kind,model", [("cnn", {"layers": 2, "base_channels": 4}),
                                        ("fno", {"modes1": 3, "modes2": 3, "width": 8, "proj_hidden": 8})])
def test_train_baselines(workspace, tmp_path, kind, model):
    (tmp_path / "c.json").write_text(json.dumps({"model": model, "train": {"max_epochs": 2, "early_stop_patience": 2}}))
    for name in ("a.ckpt", "b.ckpt"):
        assert run("train", "--model", kind, "--data", workspace / "data", "--config", tmp_path / "c.json",
                   "--out", tmp_path / name) == 0
    assert digest(tmp_path / "a.ckpt") == digest(tmp_path / "b.ckpt")


def test_eval_report_byte_reproducible(workspace, tmp_path):
    for name in ("r1.json", "r2.json"):
        assert run("eval", "--checkpoint", workspace / "m.ckpt", "--data", workspace / "data",
                   "--report", tmp_path / name) == 0
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    report = json.loads((tmp_path / "r1.json").read_text())
    assert report["model"] == "blastoformer" and report["inference_ms"] is None
    assert report["unscaled_via"] == "unscaler"


def test_eval_with_timing(workspace, tmp_path):
    assert run("eval", "--checkpoint", workspace / "m.ckpt", "--data", workspace / "data",
               "--bench-runs", 10, "--report", tmp_path / "r.json") == 0
    assert json.loads((tmp_path / "r.json").read_text())["inference_ms"] > 0


def test_predict_and_plot_byte_reproducible(workspace, tmp_path):
    (tmp_path / "s.json").write_text(sample_scenario(42).to_json())
    for k in ("1", "2"):
        assert run("predict", "--checkpoint", workspace / "m.ckpt", "--scenario", tmp_path / "s.json",
                   "--out-field", tmp_path / f"f{k}.bin", "--out-image", tmp_path / f"i{k}.ppm") == 0
        assert run("plot", "--field", tmp_path / f"f{k}.bin", "--colormap", "binary",
                   "--out", tmp_path / f"b{k}.ppm") == 0
    for stem in ("f", "i", "b"):
        ext = "bin" if stem == "f" else "ppm"
        assert (tmp_path / f"{stem}1.{ext}").read_bytes() == (tmp_path / f"{stem}2.{ext}").read_bytes()
    assert (tmp_path / "i1.ppm").read_bytes().startswith(b"P6\n9 9\n255\n")
    field = read_field(tmp_path / "f1.bin")
    assert field.shape == (9, 9) and np.all(field >= 1.0)


def test_bench_output(workspace, capsys):
    capsys.readouterr()
    assert run("bench", "--checkpoint", workspace / "m.ckpt", "--runs", 10) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["model"] == "blastoformer" and out["median_ms"] > 0 and out["runs"] == 10
    assert "not comparable" in out["note"]


def test_exit_codes(workspace, tmp_path):
    assert run("eval", "--checkpoint", tmp_path / "nope.ckpt", "--data", workspace / "data",
               "--report", tmp_path / "r.json") == 3
    (tmp_path / "bad.ckpt").write_bytes(b"garbage")
    assert run("bench", "--checkpoint", tmp_path / "bad.ckpt") == 3
    assert run("bench", "--checkpoint", workspace / "m.ckpt", "--runs", 3) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert run("train", "--model", "cnn", "--data", workspace / "data", "--config", tmp_path / "bad.json",
               "--out", tmp_path / "x.ckpt") == 2
    (tmp_path / "s.json").write_text('{"obstacles": 1}')
    assert run("predict", "--checkpoint", workspace / "m.ckpt", "--scenario", tmp_path / "s.json") == 3
    (tmp_path / "probe").write_text("# Probe 0 (0 0 1)\n1e-4 not-a-number\n")
    assert run("parse-probes", "--file", tmp_path / "probe", "--grid-side", 9, "--out", tmp_path / "f") == 3
    assert run("gen-data", "--n", 20, "--grid-side", 1, "--out", tmp_path / "d") == 2
    assert run("gen-data", "--n", 2, "--grid-side", 5, "--out", tmp_path / "d") == 3
    with pytest.raises(SystemExit) as exc:
        run("train", "--model", "mlp", "--data", workspace / "data", "--out", tmp_path / "y")
    assert exc.value.code == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "blastoformer.cli", "gen-data", "--n", "15", "--grid-side", "5",
                           "--out", str(tmp_path / "d")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 15 samples" in proc.stdout
