import json
import subprocess
import sys

import pytest

from qwalk.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_engineer_balanced_amps(capsys, tmp_path):
    code, out, _ = run(capsys, "engineer", "--amps", "1,1,1,1")
    assert code == 0
    blob = json.loads(out)
    assert blob["count"] == 2
    assert all(abs(s["probability"] - 0.25) < 1e-9 for s in blob["solutions"])


def test_engineer_unreachable_exit_code(capsys):
    code, out, err = run(capsys, "engineer", "--amps", "0.6,0.3,0.6")
    assert code == 2
    blob = json.loads(out)
    assert blob["code"] == "no-solution" and "tends to 0" in blob["message"]
    assert err.startswith("error:")


def test_engineer_too_long_points_to_optimizer(capsys):
    code, out, _ = run(capsys, "engineer", "--amps", "1,1,1,1,1,1,1,1")
    assert code == 1 and "optimize" in json.loads(out)["message"]


@pytest.mark.parametrize(
    "argv",
    [
        ["engineer"],
        ["engineer", "--amps", "1,x"],
        ["engineer", "--target", "/nonexistent.json"],
        ["bogus-command"],
        ["sweep", "--solution", "s.json", "--mode", "sideways"],
    ],
)
def test_validation_errors(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 1
    assert json.loads(out)["code"] == "validation"


def test_simulate_check_backsolve_chain(capsys, tmp_path):
    coins = tmp_path / "coins.json"
    coins.write_text(json.dumps([{"theta": 0.3, "xi": 0.1, "zeta": 1.2}, {"theta": 1.0, "xi": -0.4, "zeta": 0.2}]))
    state = tmp_path / "state.json"
    assert run(capsys, "simulate", "--coins", coins, "--out", state)[0] == 0

    code, out, _ = run(capsys, "check", "--state", state)
    assert code == 0
    chk = json.loads(out)
    assert chk["reachable"] and chk["maxReachableSteps"] == 2 and chk["maxResidual"] < 1e-12

    code, out, _ = run(capsys, "backsolve", "--state", state)
    assert code == 0
    assert json.loads(out)["fidelity"] == pytest.approx(1, abs=1e-12)

    code, out, _ = run(capsys, "project", "--state", state)
    assert code == 0 and 0 < json.loads(out)["probability"] <= 1


def test_backsolve_unreachable(capsys, tmp_path):
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"origin": 1, "amps": [[[1, 0], [0, 0]], [[1, 0], [0, 0]]]}))
    code, out, _ = run(capsys, "backsolve", "--state", state)
    assert code == 2 and json.loads(out)["code"] == "not-reachable"


def test_sweep_and_compile_from_solution(capsys, tmp_path):
    code, out, _ = run(capsys, "engineer", "--amps", "1,1,1,1", "--max-solutions", "1")
    sol = tmp_path / "sol.json"
    sol.write_text(json.dumps(json.loads(out)["solutions"][0]))

    code, out, _ = run(capsys, "sweep", "--solution", sol, "--param", "2:theta", "--grid=-0.1,0.1,5")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "step,angle,eps,fidelity,probability" and len(lines) == 6

    code, out, _ = run(capsys, "compile", "--solution", sol)
    assert code == 0
    plan = json.loads(out)
    assert len(plan["units"]) == 3 and plan["elementCounts"]["qPlates"] == 3


def test_optimize_small(capsys):
    code, out, _ = run(capsys, "optimize", "--amps", "0.6,0.8j,0", "--restarts", "2")
    assert code == 0 and json.loads(out)["fidelity"] > 1 - 1e-8


def test_histogram_files(capsys, tmp_path):
    raw, binned = tmp_path / "raw.csv", tmp_path / "bins.csv"
    code, _, _ = run(capsys, "histogram", "--steps", 3, "--samples", 5, "--bins", 4, "--out", raw, "--binned-out", binned)
    assert code == 0
    assert len(raw.read_text().strip().split("\n")) == 6
    assert len(binned.read_text().strip().split("\n")) == 5


def test_reproduce_balanced4_is_byte_identical(capsys, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "reproduce", "--case", "balanced4", "--out-dir", tmp_path / d)[0] == 0
    a = (tmp_path / "a" / "balanced4" / "solutions.json").read_bytes()
    b = (tmp_path / "b" / "balanced4" / "solutions.json").read_bytes()
    assert a == b
    blob = json.loads(a)
    assert blob["count"] == 2
    assert all(abs(s["probability"] - 0.25) < 1e-9 for s in blob["solutions"])


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qwalk", "engineer", "--amps", "1,1j,0.5"],
        capture_output=True, text=True, cwd=tmp_path,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["count"] == 1
