import os
import subprocess
import sys

import pytest

from pnap.cli import build_parser, main


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    assert capsys.readouterr().out.split() == ["ap_test", "marshak2a", "marshak2b", "lattice", "hohlraum"]


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["run", "--scenario", "ap_test", "--mesh", "16", "--order", "3", "--tmax", "0.005",
               "--out", str(out), "--format", "vtk", "--filter", "on", "--reconstruction", "weno3"])
    assert rc == 0
    files = sorted(os.listdir(out))
    assert any(f.endswith(".vtk") for f in files)
    assert "ap_test_diagnostics.csv" in files


def test_run_diffusion_csv(tmp_path):
    rc = main(["run", "--scenario", "ap_test", "--mesh", "16", "--integrator", "diffusion",
               "--tmax", "0.005", "--out", str(tmp_path)])
    assert rc == 0
    assert any(f.endswith(".csv") for f in os.listdir(tmp_path))


def test_config_error_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("name = x\nshape = round\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "shape" in capsys.readouterr().err
    assert main(["run", "--scenario", "ap_test", "--mesh", "8x8", "--out", str(tmp_path)]) == 2


def test_step_failure_exit(tmp_path, capsys, monkeypatch):
    import pnap.cli
    from pnap.scenarios import StepFailure

    def boom(scenario):
        raise StepFailure("step 3 at t = 0.1: negative available energy in 2 cell(s)")

    monkeypatch.setattr(pnap.cli, "run_simulation", boom)
    assert main(["run", "--scenario", "ap_test", "--out", str(tmp_path)]) == 1
    assert "step 3" in capsys.readouterr().err


def test_parser_rejects_bad_flags():
    p = build_parser()
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scenario", "ap_test", "--filter", "maybe"])
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scenario", "nope"])
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scenario", "ap_test", "--mesh", "0"])


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "pnap.cli", "list-scenarios"], capture_output=True, text=True)
    assert r.returncode == 0 and "lattice" in r.stdout
