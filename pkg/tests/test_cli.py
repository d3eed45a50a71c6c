"""Command-line interface: subcommands, exit codes, config files, loopback."""
import json
import socket
import threading
import time

import pytest

from p300loop import acquisition, cli


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _run(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One full simulated recording plus a model trained from it."""
    root = tmp_path_factory.mktemp("cli")
    record = root / "scenario.eegs"
    model = root / "model.json"
    assert _run(["simulate", "--out", str(record), "--seed", "0"]) == 0
    assert _run(["train", "--record", str(record),
                 "--model", str(model)]) == 0
    return {"root": root, "record": record, "model": model}


@pytest.fixture(scope="module")
def stream_assets(tmp_path_factory):
    """Small noiseless recording + model for deterministic streaming checks."""
    root = tmp_path_factory.mktemp("stream")
    record = root / "clean.eegs"
    model = root / "clean-model.json"
    base = ["--sessions-per-scenario", "2", "--background-rms", "0",
            "--alpha-amp", "0", "--blink-rate", "0", "--nan-fraction", "0"]
    assert _run(["simulate", "--out", str(record), "--seed", "3"] + base) == 0
    assert _run(["train", "--record", str(record), "--model", str(model)]) == 0
    return {"record": record, "model": model}


def _consume_with_producer(record, model, extra_producer=(), trials=3):
    """Serve `record` in a background thread and consume it; returns stdout rc."""
    port = _free_port()
    producer = threading.Thread(
        target=_run,
        args=(["stream", "producer", "--port", str(port),
               "--record", str(record)] + list(extra_producer),),
        daemon=True)
    producer.start()
    deadline = time.monotonic() + 10.0
    rc = None
    while time.monotonic() < deadline:
        rc = _run(["stream", "consumer", "--port", str(port),
                   "--model", str(model), "--trials", str(trials)])
        if rc != 2:  # 2 = connection refused before the producer bound
            break
        time.sleep(0.2)
    producer.join(timeout=10.0)
    return rc


class TestSimulate:
    def test_prints_durations_and_counts(self, workspace, capsys):
        out = workspace["root"] / "again.eegs"
        assert _run(["simulate", "--out", str(out), "--seed", "0"]) == 0
        stdout = capsys.readouterr().out
        assert "d_run = 3.6 s, d_session = 25.6 s, d_scenario = 317.2 s" in stdout
        assert "864 markers (72 targets)" in stdout
        assert "seed 0" in stdout

    def test_same_seed_gives_byte_identical_files(self, tmp_path):
        small = ["--sessions-per-scenario", "1"]
        a, b, c = (tmp_path / n for n in ("a.eegs", "b.eegs", "c.eegs"))
        assert _run(["simulate", "--out", str(a), "--seed", "5"] + small) == 0
        assert _run(["simulate", "--out", str(b), "--seed", "5"] + small) == 0
        assert _run(["simulate", "--out", str(c), "--seed", "6"] + small) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_written_file_round_trips(self, workspace):
        record = acquisition.load_record(workspace["record"])
        assert record.n_channels == 14
        assert len(record.markers) == 864

    def test_timing_flags_change_the_grid(self, tmp_path, capsys):
        out = tmp_path / "short.eegs"
        assert _run(["simulate", "--out", str(out), "--runs-per-session", "1",
                     "--sessions-per-scenario", "1"]) == 0
        stdout = capsys.readouterr().out
        assert "d_session = 6.6 s" in stdout


class TestTrain:
    def test_reports_dataset_geometry(self, workspace, capsys):
        model_path = workspace["root"] / "model2.json"
        assert _run(["train", "--record", str(workspace["record"]),
                     "--model", str(model_path)]) == 0
        stdout = capsys.readouterr().out
        assert "trained on 864 epochs (72 targets), 845 features" in stdout
        assert "cross-validated AUC" in stdout

    def test_model_file_is_loadable(self, workspace):
        model = acquisition.load_model(workspace["model"])
        assert model.weights.shape == (845,)
        assert len(model.channels) == 13
        assert "FC5" not in model.channels

    def test_window_length_flag_reshapes_features(self, stream_assets,
                                                  tmp_path):
        model_path = tmp_path / "w64.json"
        assert _run(["train", "--record", str(stream_assets["record"]),
                     "--model", str(model_path),
                     "--window-length", "64"]) == 0
        model = acquisition.load_model(model_path)
        assert model.window.length == 64
        assert model.weights.shape == (14 * 64,)


class TestEvaluate:
    def test_report_written_and_deterministic(self, tmp_path, capsys):
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        argv = ["evaluate", "--seed", "0", "--reps-per-object", "1"]
        assert _run(argv + ["--report", str(r1)]) == 0
        assert _run(argv + ["--report", str(r2)]) == 0
        stdout = capsys.readouterr().out
        assert "phase 1" in stdout and "phase 2" in stdout
        a = json.loads(r1.read_text())
        b = json.loads(r2.read_text())
        a.pop("wall_clock_seconds")
        b.pop("wall_clock_seconds")
        assert a == b

    def test_report_embeds_config(self, tmp_path):
        report_path = tmp_path / "r.json"
        assert _run(["evaluate", "--seed", "7", "--reps-per-object", "1",
                     "--mismatch", "0.05", "--report", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["config"]["seed"] == 7
        assert report["config"]["mismatch_s"] == 0.05
        assert report["config"]["subject"]["p300_amp"] == 12.0
        assert report["phase1"]["total"] == 12


class TestInspect:
    def test_record_summary(self, workspace, capsys):
        assert _run(["inspect", "--record", str(workspace["record"])]) == 0
        stdout = capsys.readouterr().out
        assert "14 channels @ 128 Hz" in stdout
        assert "markers: 864 (72 targets)" in stdout
        assert "FC5" in stdout  # NaN census names the corrupted channel

    def test_model_summary(self, workspace, capsys):
        assert _run(["inspect", "--model", str(workspace["model"])]) == 0
        stdout = capsys.readouterr().out
        assert "845 weights = 13 channels x 65 samples" in stdout

    def test_needs_an_argument(self):
        assert _run(["inspect"]) == 1


class TestConfigFile:
    def test_config_sets_defaults_and_flags_win(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "seed": 5, "sessions_per_scenario": 1, "background_rms": 0.0,
            "alpha_amp": 0.0, "blink_rate": 0.0, "nan_fraction": 0.0}))
        a = tmp_path / "a.eegs"
        b = tmp_path / "b.eegs"
        direct = tmp_path / "direct.eegs"
        assert _run(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
        assert _run(["simulate", "--config", str(cfg), "--seed", "2",
                     "--out", str(b)]) == 0
        assert _run(["simulate", "--sessions-per-scenario", "1",
                     "--background-rms", "0", "--alpha-amp", "0",
                     "--blink-rate", "0", "--nan-fraction", "0",
                     "--seed", "5", "--out", str(direct)]) == 0
        stdout = capsys.readouterr().out
        assert "seed 5" in stdout and "seed 2" in stdout
        assert a.read_bytes() == direct.read_bytes()
        assert a.read_bytes() != b.read_bytes()

    def test_non_object_config_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        assert _run(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "x.eegs")]) == 2


class TestExitCodes:
    def test_usage_errors(self):
        assert _run([]) == 1
        assert _run(["frobnicate"]) == 1
        assert _run(["train", "--model", "m.json"]) == 1
        assert _run(["stream", "producer", "--port", "1"]) == 1

    def test_missing_file_is_a_data_error(self, tmp_path):
        assert _run(["train", "--record", str(tmp_path / "nope.eegs"),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_malformed_model_is_a_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert _run(["inspect", "--model", str(bad)]) == 2

    def test_bad_magic_is_a_protocol_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.eegs"
        bad.write_bytes(b"XXXX" + bytes(32))
        assert _run(["train", "--record", str(bad),
                     "--model", str(tmp_path / "m.json")]) == 4
        assert "protocol error" in capsys.readouterr().err

    def test_singular_scatter_is_a_numeric_error(self, tmp_path, capsys):
        record = tmp_path / "tiny.eegs"
        assert _run(["simulate", "--out", str(record), "--seed", "0",
                     "--sessions-per-scenario", "1",
                     "--runs-per-session", "1"]) == 0
        # 12 epochs cannot support an unregularized 845-dim scatter
        assert _run(["train", "--record", str(record),
                     "--model", str(tmp_path / "m.json"),
                     "--shrinkage", "0"]) == 3
        assert "numeric error" in capsys.readouterr().err


class TestStreamLoopback:
    def test_consumer_recovers_selections(self, stream_assets, capsys):
        rc = _consume_with_producer(stream_assets["record"],
                                    stream_assets["model"])
        assert rc == 0
        stdout = capsys.readouterr().out
        lines = [l for l in stdout.splitlines() if l.startswith("selection")]
        # 2 sessions x 6 runs form 4 three-trial votes over targets 0, 0, 1, 1
        assert len(lines) == 4
        assert lines[0] == ("selection 1: image 0 (house) -> "
                            "Take me to my house")
        assert lines[1].startswith("selection 2: image 0")
        assert lines[2].startswith("selection 3: image 1")
        assert lines[3].startswith("selection 4: image 1")

    def test_time_scale_does_not_change_decisions(self, stream_assets, capsys):
        rc = _consume_with_producer(stream_assets["record"],
                                    stream_assets["model"])
        assert rc == 0
        instant = [l for l in capsys.readouterr().out.splitlines()
                   if l.startswith("selection")]
        rc = _consume_with_producer(stream_assets["record"],
                                    stream_assets["model"],
                                    extra_producer=["--time-scale", "0.01"])
        assert rc == 0
        paced = [l for l in capsys.readouterr().out.splitlines()
                 if l.startswith("selection")]
        assert paced == instant

    def test_trailing_trials_reported(self, stream_assets, capsys):
        # 12 runs grouped in fives: two votes, two leftover runs
        rc = _consume_with_producer(stream_assets["record"],
                                    stream_assets["model"], trials=5)
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "ignored 2 trailing trial(s)" in stdout
