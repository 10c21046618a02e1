import json

import numpy as np
import pytest

from kgm.cli import main


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def out(tmp_path, monkeypatch):
    path = tmp_path / "out"
    monkeypatch.setenv("KGM_OUTPUT_DIR", str(path))
    return path


def _strict(path):
    return json.loads(path.read_text(), parse_constant=lambda c: pytest.fail(f"non-JSON constant {c}"))


def test_solve_writes_profiles_and_summary(tmp_path, out, capsys):
    cfg = _write(tmp_path, "N = 801\nalpha = 0.05\n")
    assert main(["solve", cfg]) == 0
    summary = _strict(out / "summary.json")
    assert summary["ground_state"]["status"] == "Converged"
    assert summary["u0_nonnegative"] is True
    assert summary["config"]["N"] == 801 and summary["config"]["alpha"] == 0.05
    assert summary["constants"]["C1"] > 0
    for name in ("u", "phi", "xi", "eta", "theta", "chi"):
        data = np.loadtxt(out / f"{name}.csv", delimiter=",", skiprows=1)
        assert data.shape == (801, 2)
    assert "Converged" in capsys.readouterr().out


def test_solve_is_byte_reproducible(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "N = 401\n")
    blobs = []
    for run in ("a", "b"):
        monkeypatch.setenv("KGM_OUTPUT_DIR", str(tmp_path / run))
        assert main(["solve", cfg]) == 0
        blobs.append((tmp_path / run / "u.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_solve_without_flux_reports_failure(tmp_path, out):
    cfg = _write(tmp_path, "N = 401\nalpha = 0\nmax_iter = 300\n")
    assert main(["solve", cfg]) == 1
    assert _strict(out / "summary.json")["ground_state"]["status"] != "Converged"


def test_solve_with_deflation(tmp_path, out):
    cfg = _write(tmp_path, "N = 801\ndeflation_rounds = 1\n")
    assert main(["solve", cfg]) == 0
    ex = _strict(out / "summary.json")["excited_states"]
    assert len(ex) == 1 and ex[0]["round"] == 1


def test_verify(tmp_path, out, capsys):
    cfg = _write(tmp_path, "N = 401\nn_samples = 5\n")
    assert main(["verify", cfg]) == 0
    data = _strict(out / "verify.json")
    assert all(r["passed"] for r in data["reports"])
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("PASS decomposition") for line in lines)


def test_experiment_nonexistence(tmp_path, out, capsys):
    cfg = _write(tmp_path, "N = 401\nalpha = 0\nomega = 0.8\nn_starts = 3\n")
    assert main(["experiment", "nonexistence", cfg]) == 0
    assert "no nontrivial solution found" in capsys.readouterr().out
    assert _strict(out / "experiment_nonexistence.json")["report"]["passed"]


def test_experiment_blowup_and_noQ(tmp_path, out):
    assert main(["experiment", "blowup", _write(tmp_path, "N = 801\n")]) == 0
    assert main(["experiment", "noQ", _write(tmp_path, "N = 2001\nq_spec = decay(1)\n", "d.cfg")]) == 0
    assert (out / "experiment_noQ.json").exists()


def test_experiment_precondition_is_a_config_error(tmp_path, out, capsys):
    assert main(["experiment", "noQ", _write(tmp_path, "N = 401\n")]) == 2
    assert "configuration error" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["N = 4\n", "bogus = 1\n", "q_spec = constant(0)\n"])
def test_bad_config_exits_2(tmp_path, out, text, capsys):
    assert main(["solve", _write(tmp_path, text)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, out):
    assert main(["solve", str(tmp_path / "absent.cfg")]) == 2


def test_sweep(tmp_path, out):
    cfg = _write(tmp_path, "N = 401\n")
    assert main(["sweep", cfg, "--param", "alpha", "--values", "0.05,0.1"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("index,value,status") and len(lines) == 3
    assert _strict(out / "sweep_001.json")["config"]["alpha"] == 0.1
    assert main(["sweep", cfg, "--param", "nope", "--values", "1"]) == 2
    assert main(["sweep", cfg, "--param", "N", "--values", "3"]) == 2


def test_output_dir_from_config(tmp_path, monkeypatch):
    monkeypatch.delenv("KGM_OUTPUT_DIR", raising=False)
    target = tmp_path / "cfg_out"
    assert main(["solve", _write(tmp_path, f"N = 401\noutput_dir = {target}\n")]) == 0
    assert (target / "summary.json").exists()
