"""Command-line interface: reports, exit statuses and determinism."""

import json
import subprocess
import sys

import pytest

from affinelab.cli import main


def run(capsys, *argv):
    status = main(list(argv))
    out = capsys.readouterr()
    return status, out.out, out.err


def test_classify_builtin_json(capsys):
    status, out, _ = run(capsys, "classify", "--family", "lorentz_1_3", "--points", "5")
    rep = json.loads(out)
    assert status == 0 and rep["exit_status"] == 0
    assert rep["verdict"]["verdict"] == "LorentzSphere_1_3"
    assert set(rep) >= {"config", "per_point", "aggregate", "verdict", "versions"}
    assert len(rep["per_point"]) == 5


def test_check_negative_control_fails_tolerance(capsys, tmp_path):
    path = tmp_path / "cubic.sdl"
    path.write_text("n=3; F = (u1, u2, u3, (u1^2+u2^2+u3^2)/2 + 0.1*u1^3*u2)\n")
    status, out, _ = run(capsys, "check", str(path), "--points", "0.1,0.2,0.3")
    assert status == 1
    assert json.loads(out)["verdict"] is None


def test_text_format(capsys):
    status, out, _ = run(capsys, "classify", "--family", "Quadric_Paraboloid", "--points", "3", "--format", "text")
    assert status == 0
    assert "Quadric" in out


def test_family_emit_then_classify(capsys, tmp_path):
    path = tmp_path / "w3.sdl"
    assert run(capsys, "family", "--id", "W3", "--c", "0.5", "--emit", str(path))[0] == 0
    status, out, _ = run(capsys, "classify", str(path), "--points", "6")
    assert status == 0
    assert json.loads(out)["verdict"]["verdict"] == "WarpedFamily_3"


def test_family_prints_dsl(capsys):
    status, out, _ = run(capsys, "family", "--id", "W6")
    assert status == 0
    assert 'name = "W6"' in out and "F = (" in out


@pytest.mark.parametrize("argv", [
    ["family", "--id", "W1", "--c", "-1", "--classify"],
    ["classify", "--spec", "n=3; F = (u1, u2, u3)"],
    ["classify", "--spec", "n=3; F = (u1, u2, u3, u1^2 +* u2)"],
    ["classify", "--family", "W2", "--order", "3"],
    ["classify", "--family", "NoSuchFamily"],
])
def test_input_errors_exit_two(capsys, argv):
    status, out, err = run(capsys, *argv)
    assert status == 2
    assert "error" in json.loads(out)
    assert "affinelab: error" in err


def test_non_convex_exits_three(capsys):
    status, out, _ = run(capsys, "check", "--spec", "n=2; F = (u1, u2, u1*u2)", "--points", "0.1,0.2")
    assert status == 3
    assert json.loads(out)["per_point"][0]["error_code"] == "not_convex"


def test_reports_are_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        run(capsys, "classify", "--family", "W4", "--points", "6", "--report", str(path))
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.filterwarnings("ignore:k vanishes")
def test_scan_reports_each_setting(capsys):
    status, out, _ = run(capsys, "scan", "--family", "W3", "--grid", "c=0.5,2.0", "--points", "4",
                         "--format", "text")
    lines = out.splitlines()
    assert "WarpedFamily_3" in lines[1]
    assert "error" in lines[2]
    assert status == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "affinelab.cli", "family", "--id", "Calabi_1_2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "F" in proc.stdout
