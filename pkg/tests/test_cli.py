import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from varimax.cli import main, parse_guess, UsageError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def load(path):
    return json.loads(path.read_text())


class TestSolve:
    def test_ex1(self, tmp_path, capsys):
        out = tmp_path / "ex1.json"
        code, text, _ = run(capsys, "solve", "--problem", "ex1", "--out", str(out))
        assert code == 0
        rec = load(out)
        assert rec["a_star"][0] == pytest.approx((1 - math.e) / 2, abs=1e-6)
        assert rec["classification"] == "min-max"
        assert rec["converged"] and rec["solver"] == "el"
        assert "ex1" in text and "min-max" in text and "J*=" in text

    def test_ex3_guess(self, tmp_path, capsys):
        out = tmp_path / "ex3.json"
        code, _, _ = run(capsys, "solve", "--problem", "ex3", "--guess", "a=1.5,tf=0.5,xdot0=-1", "--out", str(out))
        assert code == 0
        assert load(out)["tf"] == pytest.approx(1 / 3, abs=1e-6)

    def test_unknown_problem(self, capsys):
        code, _, err = run(capsys, "solve", "--problem", "no-such")
        assert code == 1
        assert "ex1" in err and "ex5" in err

    @pytest.mark.parametrize("argv", [
        ["solve", "--problem", "ex1", "--guess", "b=1"],
        ["solve", "--problem", "ex1", "--guess", "a=x"],
        ["solve", "--problem", "ex1", "--guess", "a=1:2"],
        ["solve", "--problem", "ex1", "--solver", "oc"],
        ["solve", "--problem", "ex5u", "--negate"],
        ["solve", "--problem", "ex5u", "--solver", "oc-initial-uncertainty"],
        ["solve", "--problem", "ex1", "--n-nodes", "1"],
        ["solve", "--problem", "ex1", "--tol", "0"],
        ["solve"],
        ["frobnicate"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 1

    def test_nonconvergence_still_writes(self, tmp_path, capsys):
        out = tmp_path / "ex4.json"
        code, text, _ = run(capsys, "solve", "--problem", "ex4", "--max-iter", "1", "--out", str(out))
        assert code == 2
        assert load(out)["converged"] is False
        assert "NOT CONVERGED" in text

    def test_deterministic_record(self, tmp_path, capsys):
        recs = []
        for i in range(2):
            out = tmp_path / f"r{i}.json"
            run(capsys, "solve", "--problem", "ex2", "--n-nodes", "201", "--out", str(out))
            rec = load(out)
            rec.pop("timestamp")
            recs.append(json.dumps(rec, sort_keys=True))
        assert recs[0] == recs[1]

    def test_record_round_trip_and_table(self, tmp_path, capsys):
        out = tmp_path / "ex5u.json"
        code, _, _ = run(capsys, "solve", "--problem", "ex5u", "--n-nodes", "201", "--out", str(out))
        assert code == 0
        text = out.read_text()
        rec = json.loads(text)
        assert json.loads(json.dumps(rec)) == rec
        assert rec["trajectory"]["columns"] == ["t", "x1", "x2", "p1", "p2", "u1"]
        t = np.array(rec["trajectory"]["rows"])[:, 0]
        assert np.all(np.diff(t) > 0)
        assert rec["config"]["n_nodes"] == 201
        assert set(rec["conditions"]) >= {"control_stationarity", "stationarity", "boundary"}

    def test_initial_uncertainty_default_solver(self, tmp_path, capsys):
        out = tmp_path / "lq.json"
        code, _, _ = run(capsys, "solve", "--problem", "lq-init-concave", "--n-nodes", "201", "--out", str(out))
        rec = load(out)
        assert code == 0 and rec["solver"] == "oc-initial-uncertainty"
        assert rec["classification"] == "min-max"
        assert rec["trajectory"]["rows"][0][1] == pytest.approx(rec["a_star"][0], abs=1e-12)

    def test_csv_format(self, tmp_path, capsys):
        out = tmp_path / "ex1.csv"
        run(capsys, "solve", "--problem", "ex1", "--n-nodes", "101", "--format", "csv", "--out", str(out))
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["t", "x", "xdot"] and len(rows) == 102

    def test_env_grid_size(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("VARIMAX_N_NODES", "151")
        out = tmp_path / "ex2.json"
        run(capsys, "solve", "--problem", "ex2", "--out", str(out))
        assert len(load(out)["trajectory"]["rows"]) == 151


def test_parse_guess():
    assert parse_guess("a=1.5,tf=0.5,xdot0=-1,p0=3:3") == {"a": (1.5,), "tf": 0.5, "xdot0": -1.0, "p0": (3.0, 3.0)}
    assert parse_guess(None) == {}
    with pytest.raises(UsageError):
        parse_guess("tf")


class TestScan:
    def test_ex5_winner(self, tmp_path, capsys):
        out = tmp_path / "scan.csv"
        code, text, _ = run(capsys, "scan", "--problem", "ex5", "--a-min", "-0.5", "--a-max", "0.5", "--steps", "101", "--out", str(out))
        assert code == 0
        rows = list(csv.reader(out.open()))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        assert header[0] == "a" and all(h.startswith("J_") for h in header[1:])
        assert body.shape == (101, len(header))
        maxima = body[:, 1:].max(axis=0)
        assert header[1 + int(np.argmin(maxima))] == "J_u2"
        summary = json.loads(out.with_suffix(".json").read_text())
        assert summary["winner"] == "u2"
        assert "winner u2" in text

    def test_two_steps(self, tmp_path, capsys):
        out = tmp_path / "s2.csv"
        run(capsys, "scan", "--problem", "ex5", "--a-min", "-0.5", "--a-max", "0.5", "--steps", "2", "--n-nodes", "201", "--out", str(out))
        rows = list(csv.reader(out.open()))
        assert len(rows) == 3
        assert [float(r[0]) for r in rows[1:]] == [-0.5, 0.5]

    def test_point_grid(self, tmp_path, capsys):
        out = tmp_path / "s0.csv"
        run(capsys, "scan", "--problem", "ex5", "--a-min", "0.2", "--a-max", "0.2", "--n-nodes", "201", "--out", str(out))
        assert len(list(csv.reader(out.open()))) == 2

    def test_seventeen_digits(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        run(capsys, "scan", "--problem", "ex5", "--steps", "3", "--n-nodes", "201", "--out", str(out))
        value = list(csv.reader(out.open()))[1][1]
        assert len(value.lstrip("-").replace(".", "").lstrip("0")) >= 15

    @pytest.mark.parametrize("argv", [
        ["--problem", "ex1"],
        ["--problem", "ex5", "--a-min", "0.5"],
        ["--problem", "ex5", "--a-min", "0.5", "--a-max", "0.1"],
        ["--problem", "ex5", "--steps", "0"],
        ["--problem", "ex5u"],
    ])
    def test_errors(self, tmp_path, capsys, argv):
        assert run(capsys, "scan", *argv, "--out", str(tmp_path / "x.csv"))[0] == 1


class TestVerify:
    @pytest.mark.parametrize("name", ["ex1", "ex2"])
    def test_passes(self, capsys, name):
        code, text, _ = run(capsys, "verify", "--problem", name)
        assert code == 0
        assert "FAIL" not in text and "discrete oracle" in text

    def test_sign_flipped_entry_fails(self, capsys):
        code, text, _ = run(capsys, "verify", "--problem", "ex1", "--negate")
        assert code == 3
        assert "FAIL  saddle probe" in text


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "varimax.cli", "solve", "--problem", "no-such"], capture_output=True, text=True
    )
    assert proc.returncode == 1
    assert "valid keys" in proc.stderr
