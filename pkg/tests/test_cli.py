import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from instances import random_kcnf, unsat_instance
from nqc.cli import main, render
from nqc.cnf import brute_force_count, parse_dimacs, serialize_dimacs
from nqc.dilation import parse_program

BELL = "qubits 2\nh 0\ncnot 0 1\nmeasure 0\nmeasure 1\n"


@pytest.fixture
def files(tmp_path):
    (tmp_path / "bell.nqc").write_text(BELL)
    (tmp_path / "bad.nqc").write_text("qubits 1\nh 0\n\nhadamard 0\n")
    (tmp_path / "g_overflow.nqc").write_text("qubits 1\nh 0\ng 0 2.0 1000000\nmeasure 0\n")
    (tmp_path / "c.nqc").write_text("qubits 2\nh 0\ng 0 1.4142135623730951 2\ncnot 0 1\ng 1 0.5\nmeasure 0\n")
    (tmp_path / "phi.cnf").write_text("c small formula\np cnf 3 2\n1 2 0\n-1 3 0\n")
    (tmp_path / "unsat.cnf").write_text("p cnf 2 4\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n")
    return tmp_path


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv, "--format", "json")
    assert code == 0, err
    return json.loads(out)


def test_run_bell_json(files, capsys):
    rep = run_json(capsys, "run", files / "bell.nqc", "--shots", 1000, "--seed", 7)
    assert rep["schema_version"] == 1 and rep["command"] == "run"
    assert set(rep["counts"]) == {"00", "11"} and sum(rep["counts"].values()) == 1000
    assert rep["joint"] == {"00": 0.5, "11": 0.5}
    assert "wall_time" not in rep


def test_reports_are_byte_identical(files, capsys):
    argv = ("run", files / "bell.nqc", "--shots", 500, "--seed", 3, "--format", "json")
    first = run_cli(capsys, *argv)[1]
    assert run_cli(capsys, *argv)[1] == first
    argv = ("dilate", files / "c.nqc", "--shots", 2000, "--seed", 1, "--format", "json")
    assert run_cli(capsys, *argv)[1] == run_cli(capsys, *argv)[1]


def test_timing_flag(files, capsys):
    rep = run_json(capsys, "run", files / "bell.nqc", "--timing")
    assert rep["wall_time"] >= 0


def test_bad_mnemonic_exit_2(files, capsys):
    code, out, err = run_cli(capsys, "run", files / "bad.nqc")
    assert code == 2 and out == ""
    assert "line 4" in err and "hadamard" in err


@pytest.mark.parametrize(
    "argv,code",
    [
        (("run", "missing.nqc"), 2),
        (("sat", "missing.cnf"), 2),
        (("run",), 2),
        (("plan", "--initial", "1", "0", "0"), 2),
        (("sat", "{phi}", "--r", "-1"), 2),
        (("sat", "{phi}", "--g", "1.0"), 3),
        (("sat", "{phi}", "--capacity", "2"), 3),
        (("plan", "--initial", "1", "0", "0", "0", "--final", "0", "0", "1", "0", "--g", "0.5"), 3),
        (("boson", "--n0", "4", "--n1", "4", "--steps", "3"), 3),
        (("approx",), 2),
    ],
)
def test_exit_codes(files, capsys, argv, code):
    argv = [a.replace("{phi}", str(files / "phi.cnf")) for a in argv]
    got, out, err = run_cli(capsys, *argv)
    assert got == code
    assert out == "" and err


def test_capacity_env(files, capsys, monkeypatch):
    monkeypatch.setenv("NQC_CAPACITY", "2")
    assert run_cli(capsys, "sat", files / "phi.cnf")[0] == 3
    assert run_cli(capsys, "sat", files / "phi.cnf", "--capacity", "3")[0] == 0


def test_g_overflow_runs(files, capsys):
    rep = run_json(capsys, "run", files / "g_overflow.nqc")
    assert rep["probabilities"]["0"][0] == 1.0
    # squared norm of G^r (1, 1)/sqrt2 is (g^2r + g^-2r) / 2
    want = 2 * 10**6 * math.log(2) - math.log(2)
    assert rep["norm_squared"]["log"] == pytest.approx(want, rel=1e-12)


def test_sat_decision_and_verify(files, capsys):
    rep = run_json(capsys, "sat", files / "phi.cnf", "--g", 2, "--r", "auto", "--verify")
    assert rep["decision"] == "SAT" and rep["r"] == 3 and rep["verified"] is True
    assert rep["K_bruteforce"] == 4


def test_sat_unsat(files, capsys):
    rep = run_json(capsys, "sat", files / "unsat.cnf")
    assert rep["p_accept"] == 0.0 and rep["decision"] == "UNSAT"


def test_sat_shots(files, capsys):
    rep = run_json(capsys, "sat", files / "phi.cnf", "--shots", 400, "--seed", 5)
    assert rep["mode"] == "shots" and sum(rep["counts"].values()) == 400


@pytest.mark.parametrize("seed", range(4))
def test_count_exact_matches_brute_force(tmp_path, capsys, seed):
    rng = np.random.default_rng(seed)
    f = random_kcnf(rng, int(rng.integers(3, 8)), int(rng.integers(2, 20)))
    path = tmp_path / "f.cnf"
    path.write_text(serialize_dimacs(f))
    rep = run_json(capsys, "count", path, "--exact", "--verify")
    assert rep["count_estimate"] == brute_force_count(f) and rep["verified"] is True


def test_count_shots_interval(files, capsys):
    rep = run_json(capsys, "count", files / "phi.cnf", "--shots", 4000, "--seed", 2, "--verify")
    low, high = rep["interval"]
    assert low <= 4 <= high and rep["verified"] is True
    assert run_cli(capsys, "count", files / "phi.cnf", "--exact", "--shots", 10)[0] == 2


def test_verify_mismatch_exit_4(files, capsys, monkeypatch):
    import nqc.cli as cli

    monkeypatch.setattr(cli, "brute_force_count", lambda f, limit=None: 99)
    code, out, _ = run_cli(capsys, "count", files / "phi.cnf", "--verify", "--format", "json")
    assert code == 4 and json.loads(out)["verified"] is False


def test_unsat_verify_is_consistent(capsys, tmp_path):
    f = unsat_instance(np.random.default_rng(0), 5)
    path = tmp_path / "u.cnf"
    path.write_text(serialize_dimacs(f))
    rep = run_json(capsys, "sat", path, "--verify")
    assert rep["decision"] == "UNSAT" and rep["verified"] is True


def test_plan_grow(capsys):
    rep = run_json(capsys, "plan", "--initial", 1, 0, 0, 0, "--final", 0, 0, 10, 0, "--g", 2)
    assert rep["case"] == "GROW" and rep["r"] == 3
    assert rep["distance"] <= 1e-9


def test_boson_report(capsys):
    rep = run_json(capsys, "boson", "--n0", 4, "--n1", 8, "--g", 2, "--steps", 3)
    assert (rep["N"], rep["M"]) == ("32", "1")
    assert (rep["pumped"], rep["removed"]) == ("28", "7")
    assert rep["probabilities"] == pytest.approx([32 / 33, 1 / 33], rel=1e-12)


def test_boson_big_counts(capsys):
    rep = run_json(capsys, "boson", "--n0", 1, "--n1", 2**256, "--steps", 256)
    assert rep["N"] == str(2**256) and rep["M"] == "1"
    assert rep["pumped"] == str(2**256 - 1)


def test_dilate_lists_eta_and_emits(files, capsys, tmp_path):
    out_path = tmp_path / "out.nqc"
    rep = run_json(capsys, "dilate", files / "c.nqc", "--emit", out_path, "--shots", 20000, "--seed", 4)
    assert rep["eta"] == pytest.approx([0.5, 0.25])
    assert [s["repeat"] for s in rep["steps"]] == [2, 1]
    assert rep["cumulative_success"]["linear"] == pytest.approx(rep["predicted_success"]["linear"], rel=1e-12)
    assert rep["product_form"] is None
    shots = rep["shots"]
    assert rep["discarded_shots"] == shots["shots"] - shots["survived"]
    assert abs(shots["survival_rate"] - shots["exact_success"]) <= 3 * shots["sigma"]
    program = parse_program(out_path.read_text())
    assert program.etas == pytest.approx([0.5, 0.25])


def test_dilate_single_step_prints_product_form(tmp_path, capsys):
    path = tmp_path / "one.nqc"
    path.write_text("qubits 1\nh 0\ng 0 1.4142135623730951 2\n")
    rep = run_json(capsys, "dilate", path)
    assert rep["cumulative_success"]["linear"] == pytest.approx(17 / 32, rel=1e-12)
    assert rep["product_form"] == pytest.approx(25 / 64, rel=1e-12)


def test_run_dilated(files, capsys):
    rep = run_json(capsys, "run", files / "c.nqc", "--dilated")
    assert rep["dilation"]["eta"] == pytest.approx([0.5, 0.25])
    assert rep["dilation"]["final_state_probabilities"] is not None


@pytest.mark.parametrize("gate,word", [("X", "HTTTTH"), ("H", "H"), ("T", "T")])
def test_approx(capsys, gate, word):
    rep = run_json(capsys, "approx", "--gate", gate, "--depth", 8)
    assert rep["word"] == word and rep["error"] <= 1e-12


def test_approx_matrix(capsys):
    rep = run_json(capsys, "approx", "--matrix", 1, 0, 0, 0, 0, 0, 1, 0, "--depth", 4)
    assert rep["word"] == "" and rep["error"] <= 1e-12


def test_csv_and_text_formats(files, capsys):
    code, out, _ = run_cli(capsys, "sat", files / "phi.cnf", "--format", "csv")
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 0 and rows["key"] == "value" and rows["decision"] == "SAT"
    code, out, _ = run_cli(capsys, "sat", files / "phi.cnf")
    assert code == 0 and any(line.split() == ["decision", "SAT"] for line in out.splitlines())


def test_render_sanitizes_non_finite():
    text = render({"a": math.inf, "b": [-math.inf, math.nan], "c": np.float64(1.5)}, "json")
    data = json.loads(text)
    assert data == {"schema_version": 1, "a": "inf", "b": ["-inf", "nan"], "c": 1.5}


def test_output_file(files, capsys, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run_cli(capsys, "run", files / "bell.nqc", "--format", "json", "--output", target)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["command"] == "run"


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "nqc", "sat", str(files / "unsat.cnf"), "--format", "json"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["decision"] == "UNSAT"
    assert parse_dimacs((files / "unsat.cnf").read_text()).num_vars == 2
