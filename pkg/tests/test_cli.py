from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from jcedkit.cli import EXIT_BACKEND, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from jcedkit.grid import bundled_case_path
from jcedkit.scenarios import bundled_uncertainty_path, disturbance_quantiles

from conftest import six_bus_set


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_sample_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "sample", "--n", "50", "--seed", "7") == EXIT_OK
    assert run(b, "sample", "--n", "50", "--seed", "7") == EXIT_OK
    fa = (a / "scenarios_n50_seed7.csv").read_text()
    assert fa == (b / "scenarios_n50_seed7.csv").read_text()
    assert len(fa.strip().splitlines()) == 51


def test_input_errors_exit_2(tmp_path, capsys):
    assert run(tmp_path, "sample", "--n", "0") == EXIT_INPUT
    assert "--n must be >= 1" in capsys.readouterr().err
    assert run(tmp_path, "solve", "--case", "no_such_case") == EXIT_INPUT
    assert main(["solve", "--method", "bogus"]) == EXIT_INPUT
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(tmp_path, "solve", "--config", str(cfg)) == EXIT_INPUT


def test_backend_failure_exit_4(tmp_path, capsys):
    assert run(tmp_path, "solve", "--n", "20", "--backend", "exec:/nonexistent/solver") == EXIT_BACKEND


def test_infeasible_exit_3_names_family(tmp_path, capsys):
    doc = json.loads(bundled_case_path("six_bus").read_text())
    for b in doc["buses"]:
        b["d_b"] *= 10.0
    case = tmp_path / "heavy.json"
    case.write_text(json.dumps(doc))
    shutil.copy(bundled_uncertainty_path("six_bus"), tmp_path / "heavy.uncertainty.json")
    assert run(tmp_path, "solve", "--case", str(case), "--n", "20") == EXIT_INFEASIBLE
    assert "deterministic" in capsys.readouterr().err


def test_solve_msaa_respects_bounds(tmp_path, case6, capsys):
    assert run(tmp_path, "solve", "--n", "200", "--method", "msaa") == EXIT_OK
    doc = json.loads((tmp_path / "decision_msaa.json").read_text())
    dec = doc["decision"]
    assert doc["seed"] == 7 and doc["n"] == 200
    for units, H, D in ((case6.dibr, "H_w", "D_w"), (case6.storage, "H_e", "D_e")):
        for u in units:
            assert 0.0 <= dec[H][str(u.id)] <= u.H_max + 1e-9
            assert 0.0 <= dec[D][str(u.id)] <= u.D_max + 1e-9
    assert (tmp_path / "model_msaa.mps").exists()
    report = json.loads((tmp_path / "solve_report.json").read_text())
    assert report["methods"]["msaa"]["integers"] == 0


def test_solve_both_methods_reports_cost_error(tmp_path, capsys):
    assert run(tmp_path, "solve", "--n", "100", "--method", "saa", "--method", "msaa") == EXIT_OK
    out = capsys.readouterr().out
    assert "cost error (saa - msaa)/saa:" in out
    assert "cost_error" in json.loads((tmp_path / "solve_report.json").read_text())


def test_fix_jced_uses_fixed_values(tmp_path, capsys):
    rc = run(tmp_path, "solve", "--n", "100", "--mode", "fix-jced", "--fix-H", "2", "--fix-D", "4")
    assert rc == EXIT_OK
    dec = json.loads((tmp_path / "decision_msaa.json").read_text())["decision"]
    for key, want in (("H_w", 2.0), ("H_e", 2.0), ("D_w", 4.0), ("D_e", 4.0)):
        assert set(dec[key].values()) == {want}


def test_fix_jced_without_values_is_an_input_error(tmp_path, capsys):
    assert run(tmp_path, "solve", "--n", "20", "--mode", "fix-jced") == EXIT_INPUT


@pytest.fixture(scope="module")
def po_decision(tmp_path_factory):
    out = tmp_path_factory.mktemp("po")
    assert main(["solve", "--n", "200", "--out", str(out)]) == EXIT_OK
    return out / "decision_msaa.json"


def test_verify_within_quantile_passes(tmp_path, case6, po_decision, capsys):
    q = disturbance_quantiles(six_bus_set(200), case6.thresholds).abs_dp_qF
    sweep = []
    for f in (-1.0, -0.5, 0.5, 1.0):
        sweep += ["--disturbance", str(f * q)]
    rc = run(tmp_path, "verify", "--decision", str(po_decision), "--test-n", "500", *sweep)
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "thresholds: RoCoF 0.5 Hz/s, nadir 0.5 Hz, steady state 0.25 Hz" in out
    assert "frequency checks: all pass" in out
    doc = json.loads((tmp_path / "verify_report.json").read_text())
    assert doc["frequency"]["passed"]
    assert doc["ex_post"]["n_test"] == 500 and doc["ex_post"]["seed"] == 1007


def test_verify_flags_zeroed_inertia(tmp_path, po_decision, capsys):
    doc = json.loads(po_decision.read_text())
    for key in ("H_w", "D_w", "H_e", "D_e"):
        doc["decision"][key] = {i: 0.0 for i in doc["decision"][key]}
    bad = tmp_path / "zeroed.json"
    bad.write_text(json.dumps(doc))
    assert run(tmp_path, "verify", "--decision", str(bad), "--test-n", "200") == EXIT_OK
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert not report["frequency"]["passed"]
    assert any("rocof" in d["failures"] for d in report["frequency"]["disturbances"])


def test_compare_writes_curve(tmp_path, capsys):
    assert run(tmp_path, "compare", "--sizes", "40", "80") == EXIT_OK
    lines = (tmp_path / "compare_curve.csv").read_text().splitlines()
    assert lines[0] == "n,method,objective,wall_time_s"
    assert len(lines) == 1 + 2 * 2


def test_export_model(tmp_path, capsys):
    assert run(tmp_path, "export-model", "--n", "30", "--method", "saa", "--format", "lp") == EXIT_OK
    assert (tmp_path / "model_saa.lp").exists()
    assert json.loads((tmp_path / "model_symbolic.json").read_text())


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "jcedkit", "sample", "--n", "5", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 5 scenarios" in proc.stdout
