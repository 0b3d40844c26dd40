import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sea.cli import main
from sea.scenario import ConfigError, parse_config_text

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(tmp_path, command, config, *extra):
    code = main([command, "--config", str(config), "--out", str(tmp_path), *extra])
    report = tmp_path / "report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None)


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def test_maxent_command(tmp_path):
    code, rep = _run(tmp_path, "maxent", CONFIGS / "maxent_two_level.json")
    assert code == 0
    assert rep["beta"] == pytest.approx(math.log(3), abs=1e-9)
    assert max(abs(r) for r in rep["residual"]) <= 1e-9
    assert rep["seed"] == 0 and rep["constants"] == {"k": 1.0, "hbar": 1.0, "tau": 1.0}


def test_evolve_two_level(tmp_path):
    code, rep = _run(tmp_path, "evolve", CONFIGS / "two_level.json")
    assert code == 0
    s = -(0.9 * math.log(0.9) + 0.1 * math.log(0.1))
    assert rep["entropy_final"] == pytest.approx(s, abs=1e-9)
    assert rep["dissipator_norm_final"] <= 1e-6
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,S,entropy_production,mean_H,dissipator_norm,min_eigenvalue,trace_error"
    assert rep["integrator"]["t_end"] == 10.0 and rep["integrator"]["max_step"] is None


def test_verify_passes(tmp_path):
    code, rep = _run(tmp_path, "verify", CONFIGS / "ladder_relaxation.json")
    assert code == 0 and rep["passed"]
    names = {c["check_name"] for c in rep["checks"]}
    assert {"conservation_mean_H", "entropy_monotonicity", "production_vs_finite_difference",
            "final_dissipator_norm"} <= names


def test_verify_failure_exit_code(tmp_path):
    doc = json.loads((CONFIGS / "ladder_relaxation.json").read_text())
    doc["integrator"]["t_end"] = 0.5
    code, rep = _run(tmp_path, "verify", _write(tmp_path, doc))
    assert code == 1
    failed = [c["check_name"] for c in rep["checks"] if not c["pass"]]
    assert failed == ["final_dissipator_norm"]


def test_composite_command(tmp_path):
    code, rep = _run(tmp_path, "composite-evolve", CONFIGS / "composite_2x2.json")
    assert code == 0
    assert rep["dims"] == [2, 2] and "sign_convention" in rep
    assert rep["corr_final"] >= -1e-10
    assert rep["entropy_final"] >= rep["entropy_initial"]


def test_probe_command(tmp_path):
    code, rep = _run(tmp_path, "probe", CONFIGS / "probe_middle_level.json")
    assert code == 0
    assert rep["mode"] == "complement" and rep["delta"] == 1e-4
    assert rep["departure_ratio"] > 100
    assert rep["final_distance_to_maxent"] <= 1e-4


def test_same_seed_gives_identical_csv(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    cfg = CONFIGS / "random_conserved.json"
    for out, seed in ((a, "7"), (b, "7"), (c, "8")):
        out.mkdir()
        assert _run(out, "evolve", cfg, "--seed", seed)[0] == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()


def test_sweep(tmp_path, capsys):
    code = main(["evolve", "--config", str(CONFIGS / "sweep.json"), "--out", str(tmp_path), "--sweep"])
    assert code == 0
    for name in ("d2", "d3", "d4_classical"):
        assert (tmp_path / name / "trajectory.csv").exists()
    assert "d3: exit 0" in capsys.readouterr().out
    # several scenarios without --sweep is an input error
    assert main(["evolve", "--config", str(CONFIGS / "sweep.json"), "--out", str(tmp_path)]) == 2


def test_bad_json_reports_line_and_column(tmp_path, capsys):
    p = _write(tmp_path, '{\n  "name": "x",\n  "generators": \n}')
    assert main(["evolve", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "cfg.json:4:1: invalid JSON" in capsys.readouterr().err


def test_schema_errors_name_the_field():
    with pytest.raises(ConfigError, match=r"field /integrator: .*'t_ned'"):
        parse_config_text('{"integrator": {"t_ned": 1}}')
    with pytest.raises(ConfigError, match="/initial_state/diag"):
        parse_config_text('{"initial_state": {"diag": "uniform"}}')


def test_input_errors_exit_2(tmp_path):
    cases = [
        ("maxent", {"generators": {"hamiltonian": {"preset": "two_level"}}, "maxent": {"mean_H": 1.5}}),
        ("evolve", {"generators": {"hamiltonian": {"preset": "two_level"}},
                    "initial_state": {"diag": [0.5, 0.6]}}),
        ("evolve", {"generators": {"hamiltonian": {"preset": "two_level"}}}),
        ("probe", {"generators": {"hamiltonian": {"preset": "ladder", "d": 3}},
                   "initial_state": {"eigenstate": 1}, "probe": {"delta": 0.5}}),
    ]
    for i, (command, doc) in enumerate(cases):
        code, rep = _run(tmp_path / str(i), command, _write(tmp_path, doc))
        assert code == 2, doc
        assert rep["status"] == 2 and rep["error"]
    assert main(["evolve", "--config", str(tmp_path / "missing.json")]) == 2


def test_integration_failure_exit_1(tmp_path):
    doc = json.loads((CONFIGS / "ladder_relaxation.json").read_text())
    doc["integrator"].update({"max_steps": 2, "max_step": 0.01})
    code, rep = _run(tmp_path, "evolve", _write(tmp_path, doc))
    assert code == 1 and "max_steps" in rep["error"]
    assert (tmp_path / "trajectory.csv").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sea.cli", "maxent", "--config",
                          str(CONFIGS / "maxent_two_level.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    rep = json.loads((tmp_path / "report.json").read_text())
    assert np.isclose(rep["beta"], math.log(3))
