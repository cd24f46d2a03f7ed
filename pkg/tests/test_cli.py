import json

import numpy as np
import pytest

from ncbf.cli import _fold_negative_values, run
from ncbf.datagen import load_dataset
from ncbf.neural import load_model


def gen(tmp_path, name="data", count=120, extra=()):
    out = tmp_path / name
    code = run([
        "gen-data", "--count", str(count), "--seed", "3", "--out", str(out), *extra,
    ])
    assert code == 0
    return out


def train(tmp_path, data, loss, name, epochs=3, extra=()):
    out = tmp_path / name
    code = run([
        "train", "--data", str(data), "--loss", loss, "--arch", "6,16,24",
        "--epochs", str(epochs), "--batch", "32", "--seed", "1", "--out", str(out),
        *extra,
    ])
    assert code == 0
    return out


def test_gen_data_roundtrip_and_determinism(tmp_path, capsys):
    out = gen(tmp_path, "d1")
    printed = capsys.readouterr().out
    assert "120 samples" in printed
    ds = load_dataset(out)
    assert ds.count == 120
    assert ds.seed == 3
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "gen-data"
    assert manifest["config"]["count"] == 120
    assert "features.f32" in manifest["artifacts"]

    out2 = gen(tmp_path, "d2")
    assert (out / "features.f32").read_bytes() == (out2 / "features.f32").read_bytes()
    assert (out / "phase_labels.f32").read_bytes() == (out2 / "phase_labels.f32").read_bytes()


def test_gen_data_canonical_flag(tmp_path):
    out = gen(tmp_path, "dc", extra=("--canonical-order",))
    ds = load_dataset(out)
    assert ds.canonical_order is True
    angles = ds.features[:, 2::2]
    assert np.all(np.diff(angles, axis=1) >= 0)


def test_train_and_eval_pipeline(tmp_path, capsys):
    data = gen(tmp_path, "data")
    pdir = train(tmp_path, data, "phase", "p")
    mdir = train(tmp_path, data, "magnitude", "m")
    printed = capsys.readouterr().out
    assert "rad" in printed and "dB" in printed

    model, meta = load_model(pdir / "model")
    assert model.layer_sizes == (6, 16, 24)
    assert meta["loss_kind"] == "cmae"
    assert meta["train_config"]["learning_rate"] == 0.01  # phase default
    assert meta["canonical_features"] is False
    _, mmeta = load_model(mdir / "model")
    assert mmeta["loss_kind"] == "rmse"
    assert mmeta["train_config"]["learning_rate"] == 0.001  # magnitude default

    history = (pdir / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,test_loss"
    assert len(history) == 4

    edir = tmp_path / "eval"
    code = run([
        "eval", "--phase-model", str(pdir / "model"), "--mag-model", str(mdir / "model"),
        "--scenarios", "5", "--seed", "9", "--out", str(edir),
    ])
    assert code == 0
    report = json.loads((edir / "report.json").read_text())
    assert report["num_scenarios"] == 5
    assert len(report["records"]) == 5
    assert report["aggregates"]["lcmv"]["ncbf_clamped_count"] == 10
    printed = capsys.readouterr().out
    assert "closed form" in printed


def test_train_canonical_metadata_routes_to_eval(tmp_path):
    data = gen(tmp_path, "data", extra=("--canonical-order",))
    pdir = train(tmp_path, data, "phase", "p")
    mdir = train(tmp_path, data, "magnitude", "m")
    _, meta = load_model(pdir / "model")
    assert meta["canonical_features"] is True
    edir = tmp_path / "eval"
    code = run([
        "eval", "--phase-model", str(pdir / "model"), "--mag-model", str(mdir / "model"),
        "--scenarios", "3", "--seed", "2", "--out", str(edir),
    ])
    assert code == 0
    assert (edir / "report.json").is_file()


def test_mismatched_model_pair_fails(tmp_path, capsys):
    data = gen(tmp_path, "data")
    cdata = gen(tmp_path, "cdata", extra=("--canonical-order",))
    pdir = train(tmp_path, data, "phase", "p")
    mdir = train(tmp_path, cdata, "magnitude", "m")
    code = run([
        "eval", "--phase-model", str(pdir / "model"), "--mag-model", str(mdir / "model"),
        "--scenarios", "2", "--seed", "0", "--out", str(tmp_path / "e"),
    ])
    assert code == 1
    assert "feature ordering" in capsys.readouterr().err


def test_tune_writes_ranked_results(tmp_path, capsys):
    data = gen(tmp_path, "data", count=80)
    out = tmp_path / "tune"
    code = run([
        "tune", "--data", str(data), "--loss", "phase",
        "--candidates", "6,8,24;6,16,24", "--repeats", "2", "--epochs", "2",
        "--batch", "32", "--seed", "0", "--out", str(out),
    ])
    assert code == 0
    ranked = json.loads((out / "tuning.json").read_text())["ranked"]
    assert len(ranked) == 2
    assert ranked[0]["mean_test_loss"] <= ranked[1]["mean_test_loss"]
    assert len(ranked[0]["run_losses"]) == 2
    assert "over 2 runs" in capsys.readouterr().out


def test_pattern_lcmv_with_negative_positions(tmp_path):
    out = tmp_path / "pat"
    code = run([
        "pattern", "--weights-from", "lcmv",
        "--desired", "8,1.6", "--interferers", "-8,0.8,-16,4.9",
        "--out", str(out),
    ])
    assert code == 0
    lines = (out / "pattern.csv").read_text().splitlines()
    assert lines[0] == "theta_deg,range_m,gain_db"
    # default grid: one cut per distinct user range, full sweep at 0.1 deg
    assert len(lines) == 1 + 3 * 1801
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert set(np.round(np.unique(rows[:, 1]), 3)) == {0.8, 1.6, 4.9}
    # 0 dB reference at the desired user
    at_desired = rows[(np.abs(rows[:, 0] - 8.0) < 0.001) & (rows[:, 1] == 1.6)]
    assert abs(at_desired[0, 2]) < 0.01
    # deep null near each interferer on its own cut
    cut = rows[rows[:, 1] == 0.8]
    k = np.argmin(np.abs(cut[:, 0] - (-8.0)))
    assert cut[k, 2] < -100.0


def test_pattern_custom_grid_and_model_weights(tmp_path):
    data = gen(tmp_path, "data")
    pdir = train(tmp_path, data, "phase", "p")
    mdir = train(tmp_path, data, "magnitude", "m")
    out = tmp_path / "patm"
    code = run([
        "pattern", "--weights-from", "model",
        "--phase-model", str(pdir / "model"), "--mag-model", str(mdir / "model"),
        "--desired", "0,2.0", "--interferers", "10,3.0,-10,1.0",
        "--grid", "-20,20,1,2,2,1",
        "--out", str(out),
    ])
    assert code == 0
    lines = (out / "pattern.csv").read_text().splitlines()
    assert len(lines) == 1 + 41


def test_pattern_model_requires_model_flags(tmp_path, capsys):
    code = run([
        "pattern", "--weights-from", "model", "--desired", "0,2.0",
        "--out", str(tmp_path / "x"),
    ])
    assert code == 1
    assert "requires" in capsys.readouterr().err


def test_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "bench"
    code = run([
        "bench", "--grid-n", "8,16", "--k", "2", "--samples", "20",
        "--batches", "1,8", "--repeats", "1", "--seed", "0",
        "--arch", "6,32,24", "--out", str(out),
    ])
    assert code == 0
    lines = (out / "bench.csv").read_text().splitlines()
    assert lines[0] == "method,N,K,batch,samples,time_per_sample_s"
    assert len(lines) == 1 + 2 + 2
    printed = capsys.readouterr().out
    assert "slope" in printed and "crossover" in printed


def test_bad_arguments_exit_two(tmp_path):
    assert run(["gen-data", "--count", "nope", "--out", str(tmp_path)]) == 2
    assert run(["no-such-command"]) == 2
    assert run(["train", "--data", "x", "--loss", "volume", "--out", str(tmp_path)]) == 2
    assert run(["pattern", "--desired", "1.0", "--out", str(tmp_path)]) == 2
    assert run(["tune", "--data", "x", "--loss", "phase", "--candidates", ";",
                "--out", str(tmp_path)]) == 2


def test_runtime_errors_exit_one(tmp_path, capsys):
    code = run([
        "eval", "--phase-model", str(tmp_path / "none"), "--mag-model", str(tmp_path / "none"),
        "--out", str(tmp_path / "e"),
    ])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_fold_negative_values():
    argv = ["pattern", "--desired", "-8,0.8", "--interferers", "-16,4.9", "--out", "x"]
    folded = _fold_negative_values(argv)
    assert folded == ["pattern", "--desired=-8,0.8", "--interferers=-16,4.9", "--out", "x"]
    # a value flag at the end of argv is left alone
    assert _fold_negative_values(["--desired"]) == ["--desired"]
    # equals-style flags pass through untouched
    assert _fold_negative_values(["--desired=-1,2"]) == ["--desired=-1,2"]


def test_version_flag(capsys):
    assert run(["--version"]) == 0
    assert "ncbf" in capsys.readouterr().out


def test_verify_fast_tier(tmp_path, capsys):
    out = tmp_path / "verify"
    code = run(["verify", "--out", str(out)])
    printed = capsys.readouterr().out
    assert code == 0
    assert "10/10 checks passed" in printed
    assert printed.count("PASS") == 10
    results = json.loads((out / "verify.json").read_text())["results"]
    assert len(results) == 10
    assert all(r["passed"] for r in results)
