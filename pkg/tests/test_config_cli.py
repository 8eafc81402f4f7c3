import json
import subprocess
import sys

import pytest

from hr_sentinel.cli import main
from hr_sentinel.config import ConfigError, RunConfig
from hr_sentinel.estimator import load_model
from hr_sentinel.windowing import load_dataset

# -- config ----------------------------------------------------------------------


def test_config_defaults():
    cfg = RunConfig.load()
    assert cfg.window.k == 10 and cfg.estimator.k == 10 and cfg.synth.k == 10
    assert cfg.thresholds.tau_a == 20 and cfg.thresholds.tau_b == 34
    assert cfg.split.train_fraction == 0.8
    assert cfg.stream.gap_reset_s == 2


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(
        "# comment\n"
        "window.k = 12\n"
        "estimator.conv_filters = 4, 4, 8, 8\n"
        "estimator.learning_rate = 0.01  # inline comment\n"
        "ingest.robust_lag = false\n"
        "synth.clock_lag_s = none\n"
        "eval.taus = 5, 15\n"
    )
    cfg = RunConfig.load(p)
    assert cfg.estimator.k == 12 and cfg.synth.k == 12
    assert cfg.estimator.conv_filters == (4, 4, 8, 8)
    assert cfg.estimator.learning_rate == 0.01
    assert cfg.ingest.robust_lag is False
    assert cfg.synth.clock_lag_s is None
    assert cfg.eval.taus == (5.0, 15.0)


@pytest.mark.parametrize(
    "line", ["estimator.k = 12", "nosuch.key = 1", "window.nosuch = 1", "window.k = ten", "just text"]
)
def test_config_rejects(tmp_path, line):
    p = tmp_path / "bad.cfg"
    p.write_text(line + "\n")
    with pytest.raises(ConfigError, match="bad.cfg:1"):
        RunConfig.load(p)


def test_config_invalid_value_caught_at_build():
    cfg = RunConfig()
    cfg.set("filter.tau_a", "50")
    with pytest.raises(ConfigError, match="filter"):
        cfg.validate()


# -- command line ------------------------------------------------------------------


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    raw, ds, model = root / "raw", root / "ds.bin", root / "model.bin"
    assert main(["gen-data", "--out", str(raw), "--subjects", "4", "--duration", "900", "--seed", "3"]) == 0
    assert main(["prepare", "--raw", str(raw), "--out", str(ds), "--train-fraction", "0.5", "--synced-dir", str(root / "synced")]) == 0
    assert main(["train", "--dataset", str(ds), "--out", str(model), "--max-epochs", "3"]) == 0
    return root


def test_gen_data_outputs(pipeline):
    names = sorted(p.name for p in (pipeline / "raw").iterdir())
    assert "S04_ppg.csv" in names and "truth_lags.csv" in names


def test_prepare_outputs(pipeline):
    ds = load_dataset(pipeline / "ds.bin")
    assert ds.subjects_in("train") == ["S01", "S02"]
    assert ds.subjects_in("test") == ["S03", "S04"]
    truth = dict(
        line.split(",") for line in (pipeline / "raw" / "truth_lags.csv").read_text().splitlines()[1:]
    )
    for sid, lag in truth.items():
        meta = (pipeline / "synced" / f"{sid}_synced.csv.meta").read_text()
        assert f"applied_lag_s={-int(lag)}" in meta


def test_train_outputs(pipeline):
    model = load_model(pipeline / "model.bin")
    assert model.metadata["epochs_run"] == 3
    log = (pipeline / "model.bin.log.csv").read_text().splitlines()
    assert log[0] == "epoch,train_loss,val_loss" and len(log) == 4


def test_eval_oracle_is_perfect(pipeline, capsys):
    out = pipeline / "eval_oracle"
    assert main(["eval", "--oracle", "--dataset", str(pipeline / "ds.bin"), "--out-dir", str(out), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["predictor"] == "oracle"
    for row in doc["threshold_sweep"]:
        assert row["fp"] == row["fn"] == 0
        assert row["detection_accuracy_pct"] in (100.0, None)
    assert {p.name for p in out.iterdir()} == {
        "threshold_sweep.csv", "threshold_sweep.txt", "tolerance_table.csv", "tolerance_table.txt", "report.json"
    }


def test_eval_model_text(pipeline, capsys):
    rc = main(["eval", "--model", str(pipeline / "model.bin"), "--dataset", str(pipeline / "ds.bin"),
               "--out-dir", str(pipeline / "eval"), "--taus", "10,20"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "detection accuracy" in text and "GT thr" in text
    rows = (pipeline / "eval" / "threshold_sweep.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["10", "20"]


def test_eval_needs_model_or_oracle(pipeline):
    with pytest.raises(SystemExit):
        main(["eval", "--dataset", str(pipeline / "ds.bin"), "--out-dir", str(pipeline / "x")])


def test_stream_command(pipeline, capsys):
    src = pipeline / "raw" / "S03_ppg.csv"
    assert main(["stream", "--model", str(pipeline / "model.bin"), "--input", str(src)]) == 0
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[0] == "timestamp,hr_bpm,diff_pred,label"
    assert lines[1].endswith(",,warming_up")
    assert len(lines) - 1 == len(src.read_text().splitlines()) - 1
    summary = json.loads(captured.err.strip().splitlines()[-1])
    assert summary["processed"] == len(lines) - 1


def test_stream_stdin_subprocess(pipeline):
    src = (pipeline / "raw" / "S01_ppg.csv").read_text().splitlines()[:15]
    proc = subprocess.run(
        [sys.executable, "-m", "hr_sentinel.cli", "stream", "--model", str(pipeline / "model.bin"), "--human"],
        input="\n".join(src) + "\n", capture_output=True, text=True, check=True,
    )
    out = proc.stdout.splitlines()
    assert len(out) == 14 and "warming_up" in out[0] and "\033" not in proc.stdout


def test_grid_search_command(pipeline, capsys):
    out = pipeline / "grid.bin"
    rc = main(["grid-search", "--dataset", str(pipeline / "ds.bin"), "--out", str(out),
               "--grid", "kernel_size=3|7", "--max-epochs", "2"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "failed" in text and "best cell #0" in text
    assert load_model(out).config.kernel_size == 3


def test_strict_prepare_rejects_corrupt_csv(pipeline, tmp_path, capsys):
    raw = tmp_path / "raw"
    raw.mkdir()
    for name in ("S01_ppg.csv", "S01_ecg.csv", "S02_ppg.csv", "S02_ecg.csv", "S03_ppg.csv", "S03_ecg.csv"):
        (raw / name).write_bytes((pipeline / "raw" / name).read_bytes())
    with open(raw / "S02_ecg.csv", "a") as fh:
        fh.write("garbage,row\n")
    assert main(["prepare", "--raw", str(raw), "--out", str(tmp_path / "d.bin"), "--train-fraction", "0.5"]) == 1
    assert "S02_ecg.csv" in capsys.readouterr().err
    assert main(["prepare", "--raw", str(raw), "--out", str(tmp_path / "d.bin"), "--train-fraction", "0.5", "--skip-errors"]) == 0
    assert load_dataset(tmp_path / "d.bin").subjects == ["S01", "S03"]


def test_missing_files_reported(tmp_path, capsys):
    assert main(["train", "--dataset", str(tmp_path / "nope.bin"), "--out", str(tmp_path / "m.bin")]) == 1
    assert "no such file" in capsys.readouterr().err
    (tmp_path / "junk.bin").write_bytes(b"junkjunkjunkjunkjunk")
    assert main(["stream", "--model", str(tmp_path / "junk.bin"), "--input", str(tmp_path / "junk.bin")]) == 1
    assert "magic" in capsys.readouterr().err


def test_bad_config_key_exit_code(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("estimator.nonsense = 3\n")
    assert main(["gen-data", "--out", str(tmp_path / "o"), "--config", str(p)]) == 1
    assert "unknown config key" in capsys.readouterr().err
