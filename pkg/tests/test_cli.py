import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import images
from jndbench.cli import main
from jndbench.imgmetrics import encode_png


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def synth_dir(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "sources": 4, "codecs": 3, "seed": 3,
        "predictors": [
            {"name": "quiet", "noise": 0.05, "crop_noise": 0.05},
            {"name": "noisy", "noise": 0.5, "polarity": "lower", "crop_noise": 0.9},
            {"name": "hetero", "noise": 0.1, "noise_slope": 0.03},
        ],
    }))
    out = tmp_path / "syn"
    assert run("synth", "--config", cfg, "--out", out) == 0
    return out


def data_args(d):
    return ["--dataset", d / "dataset.csv", "--scores", d / "scores.csv", "--polarity", d / "polarity.json"]


def test_synth_default_then_eval(tmp_path):
    assert run("synth", "--out", tmp_path / "s") == 0
    meta = json.loads((tmp_path / "s" / "meta.json").read_text())
    assert meta["seed"] == 0 and meta["n_stimuli"] == 300
    assert run("eval", *data_args(tmp_path / "s"), "--out", tmp_path / "e") == 0
    rows = read_csv(tmp_path / "e" / "criteria.csv")
    assert len(rows) == 9
    perfect = [r for r in rows if r["metric"] == "perfect" and r["range"] == "All"][0]
    assert float(perfect["srocc"]) == 1.0 and float(perfect["z_rmse"]) < 1e-9
    # ascending All-range SROCC
    all_rows = [float(r["srocc"]) for r in rows if r["range"] == "All"]
    assert all_rows == sorted(all_rows)


def test_synth_seed_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--seed", 7, "--out", tmp_path / name) == 0
    for f in ("dataset.csv", "scores.csv", "polarity.json", "meta.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert json.loads((tmp_path / "a" / "meta.json").read_text())["seed"] == 7


def test_eval_byte_identical(synth_dir, tmp_path):
    for name in ("e1", "e2"):
        assert run("eval", *data_args(synth_dir), "--out", tmp_path / name) == 0
    for f in ("criteria.csv", "params.json", "pwrc/quiet_all.csv"):
        assert (tmp_path / "e1" / f).read_bytes() == (tmp_path / "e2" / f).read_bytes()
    params = json.loads((tmp_path / "e1" / "params.json").read_text())
    assert {p["metric"] for p in params} == {"quiet", "noisy", "hetero"}
    assert set(params[0]) >= {"B1", "B2", "B3", "B4"}


def test_eval_range_selection(synth_dir, tmp_path):
    assert run("eval", *data_args(synth_dir), "--range", "hf", "--out", tmp_path / "e") == 0
    rows = read_csv(tmp_path / "e" / "criteria.csv")
    assert {r["range"] for r in rows} == {"HF"}


def test_test_command_matrices(synth_dir, tmp_path):
    assert run("test", *data_args(synth_dir), "--range", "all", "--out", tmp_path / "t") == 0
    for test in ("mrr", "wilcoxon"):
        meta = json.loads((tmp_path / "t" / f"significance_{test}_all.json").read_text())
        cells = np.array(meta["cells"])
        assert np.all(cells == -cells.T)
        assert meta["metrics"][0] == "quiet"
        assert (tmp_path / "t" / f"significance_{test}_all.txt").exists()


def test_test_identical_columns(tmp_path, synth_dir):
    rows = read_csv(synth_dir / "scores.csv")
    with open(tmp_path / "dup.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "variant", "stimulus_id", "score"])
        for r in rows:
            if r["metric"] == "noisy" and r["variant"] == "full":
                w.writerow(["x", "full", r["stimulus_id"], r["score"]])
                w.writerow(["y", "full", r["stimulus_id"], r["score"]])
    (tmp_path / "pol.json").write_text('{"x": "lower", "y": "lower"}')
    rc = run("test", "--dataset", synth_dir / "dataset.csv", "--scores", tmp_path / "dup.csv",
             "--polarity", tmp_path / "pol.json", "--range", "all", "--out", tmp_path / "t")
    assert rc == 0
    for test in ("mrr", "wilcoxon"):
        cells = json.loads((tmp_path / "t" / f"significance_{test}_all.json").read_text())["cells"]
        assert cells == [[0, 0], [0, 0]]


def test_test_needs_two_metrics(synth_dir, tmp_path):
    rc = run("test", *data_args(synth_dir), "--metrics", "quiet", "--out", tmp_path / "t")
    assert rc == 2


def test_perfect_metric_is_an_evaluation_error(tmp_path, capsys):
    assert run("synth", "--out", tmp_path / "s") == 0
    rc = run("test", *data_args(tmp_path / "s"), "--test", "mrr", "--range", "all", "--out", tmp_path / "t")
    assert rc == 1
    assert "Fisher" in capsys.readouterr().err


def test_crop_report(synth_dir, tmp_path):
    assert run("crop", *data_args(synth_dir), "--out", tmp_path / "c") == 0
    rows = {r["metric"]: r for r in read_csv(tmp_path / "c" / "crop_report.csv")}
    assert set(rows) == {"quiet", "noisy"}  # hetero has no crop variant
    assert rows["noisy"]["mrr_decision"] == "-1"
    assert rows["noisy"]["plcc_crop"] != ""


def test_regress_outputs(synth_dir, tmp_path):
    assert run("regress", *data_args(synth_dir), "--out", tmp_path / "r") == 0
    bw = json.loads((tmp_path / "r" / "bandwidths.json").read_text())
    assert set(bw) == {"quiet", "noisy", "hetero"}
    for m, info in bw.items():
        for kind in ("rmse", "z_rmse"):
            assert info[kind]["bandwidth"] > 0
            assert (tmp_path / "r" / "curves" / f"{m}_{kind}.csv").exists()
    assert bw["hetero"]["rmse"]["trend"] > 0 and bw["hetero"]["z_rmse"]["trend"] < 0


def make_manifest(tmp_path, n_pairs=2, missing=False):
    ref = images.textured_rgb(176, 176, 1)
    encode_png(ref, tmp_path / "ref.png")
    lines = ["stimulus_id,ref,dist,variant"]
    for i in range(n_pairs):
        encode_png(images.distorted(ref, ("noise", "blur")[i % 2], i), tmp_path / f"d{i}.png")
        lines.append(f"s{i},ref.png,d{i}.png,full")
    if missing:
        lines.append("s9,ref.png,nope.png,full")
    (tmp_path / "manifest.csv").write_text("\n".join(lines) + "\n")
    return tmp_path / "manifest.csv"


def test_metrics_two_pairs(tmp_path):
    man = make_manifest(tmp_path)
    assert run("metrics", "--manifest", man, "--images", tmp_path, "--out", tmp_path / "m") == 0
    rows = read_csv(tmp_path / "m" / "scores.csv")
    assert len(rows) == 14
    assert [r["stimulus_id"] for r in rows[:7]] == ["s0"] * 7


def test_metrics_parallel_matches_serial(tmp_path):
    man = make_manifest(tmp_path, n_pairs=3)
    assert run("metrics", "--manifest", man, "--images", tmp_path, "--out", tmp_path / "a") == 0
    assert run("metrics", "--manifest", man, "--images", tmp_path, "--jobs", 2, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "scores.csv").read_bytes() == (tmp_path / "b" / "scores.csv").read_bytes()


def test_metrics_missing_file(tmp_path, capsys):
    man = make_manifest(tmp_path, missing=True)
    rc = run("metrics", "--manifest", man, "--images", tmp_path, "--out", tmp_path / "m")
    assert rc == 2
    assert not (tmp_path / "m" / "scores.csv").exists()
    assert "nope.png" in capsys.readouterr().err


def test_schema_error_exit_code(tmp_path):
    (tmp_path / "bad.csv").write_text("stimulus_id,jnd_mean\ns1,0.5\n")
    (tmp_path / "s.csv").write_text("metric,variant,stimulus_id,score\nssim,full,s1,0.9\n")
    rc = run("eval", "--dataset", tmp_path / "bad.csv", "--scores", tmp_path / "s.csv", "--out", tmp_path / "o")
    assert rc == 2


def test_env_overrides(synth_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("JNDBENCH_DATASET", str(synth_dir / "dataset.csv"))
    monkeypatch.setenv("JNDBENCH_SCORES", str(synth_dir / "scores.csv"))
    monkeypatch.setenv("JNDBENCH_POLARITY", str(synth_dir / "polarity.json"))
    monkeypatch.setenv("JNDBENCH_RANGE", "mf")
    monkeypatch.setenv("JNDBENCH_OUT", str(tmp_path / "envout"))
    assert run("eval") == 0
    rows = read_csv(tmp_path / "envout" / "criteria.csv")
    assert {r["range"] for r in rows} == {"MF"}
    monkeypatch.setenv("JNDBENCH_ALPHA", "2.0")
    assert run("eval") == 2


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "jndbench.cli", "synth", "--out", str(tmp_path / "s"), "--seed", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "300 stimuli" in proc.stdout
