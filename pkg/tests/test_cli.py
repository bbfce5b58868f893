import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from goldpan.calibration import save_profiles, synthetic_trial_log, write_trial_log, ProfileFile, PositionEstimate
from goldpan.cli import CSV_COLUMNS, main
from goldpan.core_model import DetectorProfile

SMALL = ["--runs", "6", "--iterations", "4", "--n-items", "8", "--seed", "42"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestSimulate:
    def test_writes_csv_and_sidecar(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert main(["simulate", *SMALL, "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 1 + 3 * 4
        assert {r[0] for r in rows[1:]} == {"GoldPanning", "HungarianIG", "PSC"}
        side = json.loads(out.with_suffix(".json").read_text())
        assert side["config"]["seed"] == 42 and side["command"] == "simulate"

    def test_perfect_single_item(self, tmp_path):
        prof = tmp_path / "perfect.json"
        save_profiles(ProfileFile(1, [PositionEstimate(0, 1.0, 0.0, 1, 0)]), prof)
        out = tmp_path / "one.csv"
        code = main(["simulate", "--runs", "1", "--iterations", "2", "--n-items", "1", "--seed", "0",
                     "--detector-file", str(prof), "--strategies", "GoldPanning", "--out", str(out)])
        assert code == 0
        rows = read_csv(out)
        assert rows[1][:3] == ["GoldPanning", "1", "1.0"]

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", *SMALL, "--out", str(a)])
        main(["simulate", *SMALL, "--out", str(b), "--parallelism", "3"])
        assert a.read_bytes() == b.read_bytes()

    def test_sidecar_reproduces(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", *SMALL, "--out", str(a)])
        assert main(["simulate", "--config", str(a.with_suffix(".json")), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_items": 6, "runs": 3, "iterations": 2, "seed": 5,
                                   "strategies": ["PSC"], "output_path": str(tmp_path / "x.csv")}))
        assert main(["simulate", "--config", str(cfg), "--iterations", "3"]) == 0
        rows = read_csv(tmp_path / "x.csv")
        assert [r[1] for r in rows[1:]] == ["1", "2", "3"]

    def test_random_seed_is_recorded(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["simulate", "--runs", "2", "--iterations", "2", "--n-items", "4", "--seed", "random",
                     "--out", str(out)]) == 0
        seed = json.loads(out.with_suffix(".json").read_text())["config"]["seed"]
        assert isinstance(seed, int) and 0 <= seed < 2**64

    @pytest.mark.parametrize("argv", [
        ["simulate", "--runs", "2", "--iterations", "2"],  # no seed
        ["simulate", "--seed", "1", "--runs", "0"],
        ["simulate", "--seed", "1", "--strategies", "Bogus"],
        ["simulate", "--seed", "-3"],
        ["simulate", "--seed", "abc"],
    ])
    def test_config_errors_exit_2(self, argv, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            sys.exit(main([*argv, "--out", str(tmp_path / "o.csv")]))
        assert info.value.code == 2

    def test_unknown_config_field(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 1, "n_itemz": 4}))
        assert main(["simulate", "--config", str(cfg)]) == 2
        assert "n_itemz" in capsys.readouterr().err

    def test_bad_field_value_diagnostic(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 1, "iterations": "many"}))
        assert main(["simulate", "--config", str(cfg)]) == 2
        assert "iterations" in capsys.readouterr().err

    def test_missing_config_exit_3(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--seed", "1"]) == 3

    def test_unwritable_output_exit_3(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["simulate", *SMALL, "--out", str(blocker / "sub" / "o.csv")]) == 3

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "m.csv"
        proc = subprocess.run([sys.executable, "-m", "goldpan", "simulate", *SMALL, "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert out.exists()


class TestSweeps:
    def test_noise_zero_matches_simulate(self, tmp_path):
        sim, sw = tmp_path / "s.csv", tmp_path / "n.csv"
        main(["simulate", *SMALL, "--strategies", "GoldPanning", "--out", str(sim)])
        assert main(["sweep-noise", *SMALL, "--sigmas", "0", "--out", str(sw)]) == 0
        a, b = read_csv(sim), read_csv(sw)
        assert b[0] == ["sigma"] + CSV_COLUMNS
        assert [r[1:] for r in b[1:]] == a[1:]

    def test_default_noise_grid(self, tmp_path):
        out = tmp_path / "n.csv"
        assert main(["sweep-noise", *SMALL, "--out", str(out)]) == 0
        sigmas = [r[0] for r in read_csv(out)[1:]]
        assert sorted(set(map(float, sigmas))) == [0.0, 0.0051, 0.0255, 0.051]
        assert len(sigmas) == 4 * 4

    def test_alpha_blocks(self, tmp_path):
        out = tmp_path / "a.csv"
        assert main(["sweep-concentration", *SMALL, "--alphas", "0.1,100", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["alpha"] + CSV_COLUMNS
        assert sorted({float(r[0]) for r in rows[1:]}) == [0.1, 100.0]
        assert {r[1] for r in rows[1:]} == {"GoldPanning", "PSC"}

    def test_bad_alpha(self, tmp_path):
        assert main(["sweep-concentration", *SMALL, "--alphas", "0,1", "--out", str(tmp_path / "a.csv")]) == 2


class TestCalibrate:
    def test_recovers_profiles(self, tmp_path, capsys):
        truth = [DetectorProfile(0.8, 0.15), DetectorProfile(0.7, 0.1)]
        log = tmp_path / "log.jsonl"
        write_trial_log(synthetic_trial_log(truth, 10_000, np.random.default_rng(0), [0, 1]), log)
        out = tmp_path / "prof.json"
        assert main(["calibrate", str(log), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        for est, ref in zip(doc["positions"], truth):
            assert abs(est["tpr"] - ref.tpr) <= 0.02 and abs(est["fpr"] - ref.fpr) <= 0.02
        table = capsys.readouterr().out.strip().splitlines()
        assert table[0].split() == ["position", "tpr", "fpr", "diag"]
        assert len(table) == 3

    def test_empty_log(self, tmp_path):
        log = tmp_path / "empty.jsonl"
        log.write_text("")
        assert main(["calibrate", str(log), "--out", str(tmp_path / "p.json")]) == 2

    def test_single_position(self, tmp_path, capsys):
        log = tmp_path / "one.jsonl"
        log.write_text('{"trial_id": "a", "gold_position": 0, "cited_position": 0, "n_positions": 1}\n')
        assert main(["calibrate", str(log), "--out", str(tmp_path / "p.json")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2 and "undef" in lines[1]  # no non-gold trials: fpr undefined

    def test_bad_line_reported(self, tmp_path, capsys):
        log = tmp_path / "bad.jsonl"
        log.write_text('{"trial_id": "a", "gold_position": 0, "cited_position": 0, "n_positions": 2}\n{oops\n')
        assert main(["calibrate", str(log), "--out", str(tmp_path / "p.json")]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_profile_feeds_simulation(self, tmp_path):
        truth = [DetectorProfile(0.8, 0.05), DetectorProfile(0.6, 0.1), DetectorProfile(0.7, 0.02)]
        log = tmp_path / "log.jsonl"
        write_trial_log(synthetic_trial_log(truth, 500, np.random.default_rng(1), [0, 1, 2]), log)
        prof = tmp_path / "prof.json"
        assert main(["calibrate", str(log), "--out", str(prof), "--smoothing"]) == 0
        out = tmp_path / "s.csv"
        assert main(["simulate", "--seed", "3", "--runs", "4", "--iterations", "3", "--n-items", "5",
                     "--detector-file", str(prof), "--out", str(out)]) == 0
