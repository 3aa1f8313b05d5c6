import json
import os
import subprocess
import sys

import pytest

from nlqc_lightcone.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    assert code == 0, err
    return json.loads(out)


def test_analyze_brickwork(capsys, circuits_dir):
    data = run_json(capsys, "analyze", circuits_dir / "brickwork_n8_d2.circ")
    assert [g["fm"] for g in data["gates"]] == [1, 1, 1, 1, 3, 3, 3, 3]
    assert data["V"] == 6 and data["max_fm"] == 3
    code, text, _ = run(capsys, "analyze", circuits_dir / "brickwork_n8_d2.circ")
    assert code == 0 and "V = 6" in text


def test_analyze_depth_one(capsys, circuits_dir):
    assert run_json(capsys, "analyze", circuits_dir / "depth1_n4_k2.circ")["V"] == 2


def test_analyze_malformed(capsys, circuits_dir):
    code, _, err = run(capsys, "analyze", circuits_dir / "malformed.circ")
    assert code == 1 and "line 4" in err


def test_analyze_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", tmp_path / "nope.circ")
    assert code == 1 and "no such file" in err


def test_cost_single_gate(capsys, circuits_dir):
    data = run_json(capsys, "cost", circuits_dir / "single_h_n2.circ", "--epsilon", 2)
    assert data["N"] == 64 and data["E"] == 128 and data["initial_pairs"] == 1
    assert data["per_gate"][0]["pairs"] == 128


def test_cost_brickwork_ports_and_geo(capsys, circuits_dir):
    data = run_json(capsys, "cost", circuits_dir / "brickwork_n8_d2.circ", "--ports", 3, "--geo", "1,1")
    assert data["E"] == 480
    assert data["bounds"]["geometric"] == 4 * 2 * 2**2
    plain = run_json(capsys, "cost", circuits_dir / "brickwork_n8_d2.circ", "--ports", 3)
    assert "geometric" not in plain["bounds"]


def test_cost_regime(capsys, circuits_dir):
    data = run_json(capsys, "cost", circuits_dir / "single_h_n2.circ", "--ports", 4,
                    "--k-class", "polylog", "--d-class", "loglog")
    assert data["regime"] == "quasi-quasi-polynomial"


@pytest.mark.parametrize("extra", [["--epsilon", "1", "--ports", "3"], [], ["--ports", "3", "--geo", "x"]])
def test_cost_input_errors(capsys, circuits_dir, extra):
    code, _, err = run(capsys, "cost", circuits_dir / "single_h_n2.circ", *extra)
    assert code == 1 and err.startswith("error:")


def test_table_and_json_agree(capsys, circuits_dir):
    data = run_json(capsys, "cost", circuits_dir / "brickwork_n8_d2.circ", "--ports", 3)
    _, text, _ = run(capsys, "cost", circuits_dir / "brickwork_n8_d2.circ", "--ports", 3)
    assert f"E              {data['E']}" in text


def test_simulate_ideal_brickwork(capsys, circuits_dir):
    code, text, _ = run(capsys, "simulate", circuits_dir / "brickwork_ideal.json")
    assert code == 0 and "fidelity         1.000000000" in text


def test_simulate_physical_reports_budget(capsys, circuits_dir):
    data = run_json(capsys, "simulate", circuits_dir / "single_h_physical.json", "--strict")
    assert data["error_budget"] == pytest.approx(4.0)
    assert data["within_budget"] and data["trace_distance"] > 0


def test_simulate_threshold_violation(capsys, circuits_dir, tmp_path):
    cfg = json.loads((circuits_dir / "single_h_physical.json").read_text())
    cfg.update(circuit=str(circuits_dir / "single_h_n2.circ"), N=2, threshold=0.999)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    code, _, _ = run(capsys, "simulate", path)
    assert code == 2


def test_simulate_extensions_and_epsilon(capsys, circuits_dir, tmp_path):
    assert run(capsys, "simulate", circuits_dir / "shift_ideal.json")[0] == 0
    assert run(capsys, "simulate", circuits_dir / "sandwich_ideal.json")[0] == 0
    cfg = {"circuit": str(circuits_dir / "single_h_n2.circ"), "epsilon": 2, "threshold": 0.99}
    path = tmp_path / "eps.json"
    path.write_text(json.dumps(cfg))
    assert run_json(capsys, "simulate", path)["N"] == 64


def test_simulate_bad_config(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(capsys, "simulate", path)[0] == 1
    path.write_text(json.dumps({"circuit": "x.circ", "N": 2, "epsilon": 1}))
    assert run(capsys, "simulate", path)[0] == 1


def test_seed_from_environment(capsys, circuits_dir, tmp_path, monkeypatch):
    cfg = json.loads((circuits_dir / "single_h_physical.json").read_text())
    del cfg["seed"]
    cfg["circuit"] = str(circuits_dir / "single_h_n2.circ")
    path = tmp_path / "noseed.json"
    path.write_text(json.dumps(cfg))
    monkeypatch.setenv("NLQC_SEED", "42")
    assert run_json(capsys, "simulate", path)["seed"] == 42


def test_simulate_output_is_byte_identical(circuits_dir):
    cmd = [sys.executable, "-m", "nlqc_lightcone.cli", "simulate",
           str(circuits_dir / "single_h_physical.json"), "--format", "json"]
    env = dict(os.environ)
    a = subprocess.run(cmd, capture_output=True, env=env, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, env=env, check=True).stdout
    assert a == b and b"fidelity" in a


def test_pbt_bench(capsys):
    rows = run_json(capsys, "pbt-bench", "--k", 1, "--N-list", "2,4,8,16")["rows"]
    assert [r["N"] for r in rows] == [2, 4, 8, 16]
    lows = [r["lower"] for r in rows]
    assert lows == sorted(lows, reverse=True)
    assert [round(r["analytic_bound"], 2) for r in rows] == [11.31, 8.0, 5.66, 4.0]


def test_pbt_bench_rejects_intractable(capsys):
    code, _, err = run(capsys, "pbt-bench", "--k", 2, "--N-list", "64")
    assert code == 1 and "260 qubits" in err


def test_compare_subcommand(capsys, circuits_dir):
    data = run_json(capsys, "bk-compare", circuits_dir / "depth1_n4_k2.circ", "--epsilon", 2,
                    "--t-depth", 0, "--t-count", 0)
    assert data["N_single"] == "262144"
    assert data["E_single"] == 2 * 4 * 262144
    assert data["log2_T_depth"] == 0.0 and data["log2_T_count"] == pytest.approx(2.0)
    assert data["E"] < data["E_single"]


def test_console_script_installed():
    out = subprocess.run(["nlqc", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "pbt-bench" in out.stdout
