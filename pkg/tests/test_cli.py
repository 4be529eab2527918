import csv
import json
import math
import subprocess
import sys

import pytest

from randbell import cli
from randbell.cli import main


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith(cli.META_PREFIX)
    return list(csv.DictReader(lines[1:]))


class TestTrialCommands:
    def test_triads_example(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        assert main(["triads", "--trials", "100", "--visibility", "1.0", "--seed", "7", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert len(rows) == 100
        assert list(rows[0]) == cli.TRIAL_COLUMNS
        assert all(float(r["chsh"]) > 2 and r["violated"] == "1" for r in rows)
        assert all(r["chsh_err"] == "" for r in rows)
        assert "mean CHSH" in capsys.readouterr().out

    def test_random_counts_example(self, tmp_path):
        out = tmp_path / "r.csv"
        code = main(["random", "--m", "5", "--trials", "100", "--visibility", "0.869", "--counts-rate", "1000",
                     "--resamples", "100", "--out", str(out)])
        assert code == 0
        rows = read_csv(out)
        violations = sum(r["violated"] == "1" for r in rows)
        assert 85 <= violations <= 100
        assert all(float(r["chsh_err"]) > 0 for r in rows)

    def test_stdout_when_no_out(self, capsys):
        assert main(["triads", "--trials", "3"]) == 0
        captured = capsys.readouterr()
        assert captured.out.startswith(cli.META_PREFIX)
        assert "mean CHSH" in captured.err

    def test_twelve_significant_digits(self, tmp_path):
        out = tmp_path / "t.csv"
        main(["triads", "--trials", "5", "--out", str(out)])
        for r in read_csv(out):
            mantissa = r["chsh"].replace(".", "").lstrip("0")
            assert len(mantissa.split("e")[0]) <= 12


class TestCurveAndHist:
    def test_curve_m2(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["curve", "--mode", "random", "--m", "2", "--visibility", "1.0", "--trials", "20000",
                     "--out", str(out)]) == 0
        rows = read_csv(out)
        assert list(rows[0]) == cli.CURVE_COLUMNS
        assert float(rows[0]["probability"]) == pytest.approx(0.28, abs=0.015)

    def test_curve_over_m(self, tmp_path):
        out = tmp_path / "c.csv"
        main(["curve", "--axis", "m", "--grid", "2,3,4", "--trials", "2000", "--out", str(out)])
        assert [float(r["axis"]) for r in read_csv(out)] == [2, 3, 4]

    def test_hist(self, tmp_path):
        out = tmp_path / "h.csv"
        assert main(["hist", "--trials", "2000", "--bin-width", "0.1", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert list(rows[0]) == cli.HIST_COLUMNS
        assert sum(int(r["count"]) for r in rows) == 2000
        assert float(rows[-1]["bin_end"]) == pytest.approx(2 * math.sqrt(2))


class TestOutput:
    def test_empty_result_is_header_only(self):
        text = cli.render({"tool": "randbell"}, cli.TRIAL_COLUMNS, [], "csv")
        lines = text.splitlines()
        assert len(lines) == 2 and lines[1] == ",".join(cli.TRIAL_COLUMNS)

    def test_same_seed_identical_files(self, tmp_path):
        paths = [tmp_path / f"{k}.csv" for k in range(2)]
        for p in paths:
            main(["random", "--m", "3", "--trials", "200", "--seed", "4", "--counts-rate", "500", "--out", str(p)])
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_json_matches_csv(self, tmp_path):
        c, j = tmp_path / "x.csv", tmp_path / "x.json"
        args = ["random", "--mode", "voltages", "--m", "3", "--trials", "30", "--seed", "2"]
        main(args + ["--out", str(c)])
        main(args + ["--out", str(j), "--format", "json"])
        doc = json.loads(j.read_text())
        assert doc["meta"]["params"]["mode"] == "voltages"
        for rc, rj in zip(read_csv(c), doc["rows"], strict=True):
            assert float(rc["chsh"]) == rj["chsh"]
            assert int(rc["minus_pos"]) == rj["minus_pos"]

    def test_rerun_reproduces_bytes(self, tmp_path):
        first, again = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["random", "--m", "4", "--trials", "50", "--visibility", "0.9", "--delta", "0.05", "--seed", "9",
              "--counts-rate", "800", "--accidental-rate", "lab", "--out", str(first)])
        assert main(["rerun", str(first), "--out", str(again)]) == 0
        assert first.read_bytes() == again.read_bytes()

    def test_rerun_json(self, tmp_path):
        first, again = tmp_path / "a.json", tmp_path / "b.json"
        main(["curve", "--grid", "0.8,1.0", "--trials", "500", "--format", "json", "--out", str(first)])
        assert main(["rerun", str(first), "--out", str(again)]) == 0
        assert first.read_bytes() == again.read_bytes()

    def test_metadata_carries_defaults(self, tmp_path):
        out = tmp_path / "t.csv"
        main(["random", "--trials", "2", "--out", str(out)])
        meta = cli.read_meta(str(out))
        assert meta["params"]["m"] == 5 and meta["params"]["resamples"] == 0
        assert meta["params"]["vmax"] == 7.0 and meta["version"]


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["triads", "--bogus"],
        ["triads", "--trials", "abc"],
        ["triads", "--trials", "0"],
        ["random", "--mode", "triads", "--m", "4"],
        ["triads", "--visibility", "2"],
        ["random", "--counts-rate", "100", "--resamples", "10"],
        ["triads", "--threads", "0"],
        [],
    ])
    def test_config_errors(self, argv, capsys):
        assert main(argv) == 1
        assert capsys.readouterr().err

    def test_unwritable_path(self, tmp_path):
        assert main(["triads", "--trials", "2", "--out", str(tmp_path / "missing" / "x.csv")]) == 2

    def test_rerun_missing_file(self, tmp_path):
        assert main(["rerun", str(tmp_path / "nope.csv")]) == 2

    def test_help(self, capsys):
        assert main(["triads", "--help"]) == 0
        assert "--counts-rate" in capsys.readouterr().out


def test_check_command(capsys):
    assert main(["check", "--size", "200"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "randbell", "triads", "--trials", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == ",".join(cli.TRIAL_COLUMNS)
