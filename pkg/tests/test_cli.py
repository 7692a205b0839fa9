import json
import subprocess
import sys
from pathlib import Path

import pytest

from cashband.cli import main
from cashband.config import ConfigError, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE_MODEL = {"rho": 0.1, "diffusion": "abm", "alpha": 0.0, "sigma": 5.4, "kappa": 0.5,
              "c_neg": 1.0, "c_pos": 1.0, "l_cost": 4.0, "u_cost": 2.0}


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


@pytest.fixture
def solved(tmp_path):
    cfg = write(tmp_path, {"model": BASE_MODEL})
    out = tmp_path / "solution.json"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    return cfg, out


def test_solve_writes_solution(solved, tmp_path):
    cfg, out = solved
    doc = json.loads(out.read_text())
    sol = doc["solution"]
    assert sol["x_lower"] < 0 < sol["x_upper"]
    assert sol["residual_norm"] < 1e-9
    assert doc["model"] == BASE_MODEL
    grid = tmp_path / "grid.csv"
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "again.json"), "--grid-csv", str(grid),
                 "--grid-points", "11"]) == 0
    lines = grid.read_text().splitlines()
    assert lines[0] == "x,J,dJ" and len(lines) == 12


def test_infeasible_exit(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {**BASE_MODEL, "c_neg": 0.3}})
    assert main(["solve", "--config", cfg]) == 3
    assert "c_neg >= rho*l_cost" in capsys.readouterr().err


@pytest.mark.parametrize("doc", [
    "{not json",
    {"model": {**BASE_MODEL, "colour": "red"}},
    {"model": BASE_MODEL, "extras": {}},
    {"model": {**BASE_MODEL, "sigma": "big"}},
    {"model": {**BASE_MODEL, "diffusion": "ou"}},
    {"solver": {"newton_tol": 1e-10}},
    {"model": BASE_MODEL, "solver": {"damping": 2.0}},
], ids=["syntax", "unknown-key", "unknown-section", "non-numeric", "ou-without-eta", "no-model", "bad-solver"])
def test_malformed_config_exit(tmp_path, doc):
    assert main(["solve", "--config", write(tmp_path, doc)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.json")]) == 2


def test_non_convergence_exit(tmp_path):
    cfg = write(tmp_path, {"model": BASE_MODEL, "solver": {"max_iters": 1, "newton_tol": 1e-14}})
    assert main(["solve", "--config", cfg]) == 4


def test_verify_solved_case(solved, capsys):
    cfg, out = solved
    assert main(["verify", "--config", cfg, "--solution", str(out)]) == 0
    assert "verification: PASS" in capsys.readouterr().out


def test_verify_perturbed_barrier(solved, tmp_path, capsys):
    cfg, out = solved
    doc = json.loads(out.read_text())
    doc["solution"]["x_upper"] += 0.1
    bad = write(tmp_path, doc, "bad.json")
    report = tmp_path / "report.json"
    assert main(["verify", "--config", cfg, "--solution", bad, "--out", str(report)]) == 1
    text = capsys.readouterr().out
    assert "FAIL pasting_slope" in text or "FAIL pasting_curvature" in text
    assert json.loads(report.read_text())["passed"] is False


def test_verify_missing_solution(solved, tmp_path):
    cfg, _ = solved
    assert main(["verify", "--config", cfg, "--solution", str(tmp_path / "nope.json")]) == 2


def test_verify_solution_without_barriers(solved, tmp_path):
    cfg, _ = solved
    assert main(["verify", "--config", cfg, "--solution", write(tmp_path, {"solution": {}}, "empty.json")]) == 2


def test_simulate_reports_z_and_is_reproducible(tmp_path, capsys):
    sim = {"n_paths": 400, "dt": 0.01, "horizon": 100.0, "seed": 3, "x0": 0.0}
    cfg = write(tmp_path, {"model": BASE_MODEL, "simulation": sim})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    out = capsys.readouterr().out
    for key in ("estimate", "std_error", "analytic", "z"):
        assert any(line.startswith(key) for line in out.splitlines())
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    assert main(["simulate", "--config", cfg, "--out", str(c), "--seed", "4"]) == 0
    assert json.loads(c.read_text())["mean_cost"] != json.loads(a.read_text())["mean_cost"]


def test_simulate_bad_section(tmp_path):
    cfg = write(tmp_path, {"model": BASE_MODEL, "simulation": {"n_paths": 10, "dt": 20.0}})
    assert main(["simulate", "--config", cfg]) == 2
    cfg = write(tmp_path, {"model": BASE_MODEL, "simulation": {"scenario": "sideways"}})
    assert main(["simulate", "--config", cfg]) == 2
    assert main(["simulate", "--config", write(tmp_path, {"model": BASE_MODEL})]) == 2


def test_sweep_partial_failure_still_writes(tmp_path):
    cfg = write(tmp_path, {"model": BASE_MODEL, "sweep": {"axis": "c_neg", "grid": [0.3, 1.0]}})
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 5
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and lines[1].split(",")[-2] == "false" and lines[2].split(",")[-2] == "true"


def test_sweep_output_is_byte_identical(tmp_path):
    doc = {"model": BASE_MODEL, "sweep": {"axis": "sigma", "grid": {"start": 2, "stop": 8, "num": 4},
                                          "overlays": [["kappa", 0.0], ["kappa", 1.0]]}}
    cfg = write(tmp_path, doc)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_grid_and_overlay_validation():
    with pytest.raises(ConfigError):
        parse_config({"model": BASE_MODEL, "sweep": {"axis": "sigma", "grid": [3, 2]}})
    with pytest.raises(ConfigError):
        parse_config({"model": BASE_MODEL, "sweep": {"axis": "sigma", "grid": [1], "overlays": [["kappa"]]}})
    with pytest.raises(ConfigError):
        parse_config({"model": BASE_MODEL, "sweep": {"axis": "sigma", "grid": {"start": 1, "stop": 2}}})


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"model": {**BASE_MODEL, "c_pos": 0.1}})
    run = subprocess.run([sys.executable, "-m", "cashband.cli", "solve", "--config", cfg],
                         capture_output=True, text=True)
    assert run.returncode == 3 and "c_pos >= rho*u_cost" in run.stderr


def _subcommand(doc):
    if "sweep" in doc:
        return "sweep"
    return "simulate" if "simulation" in doc else "solve"


@pytest.mark.slow
@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_config_passes(path, tmp_path):
    doc = json.loads(path.read_text())
    out = tmp_path / "out"
    assert main([_subcommand(doc), "--config", str(path), "--out", str(out)]) == 0
    if "sweep" not in doc:
        solution = tmp_path / "solution.json"
        assert main(["solve", "--config", str(path), "--out", str(solution)]) == 0
        assert main(["verify", "--config", str(path), "--solution", str(solution)]) == 0
