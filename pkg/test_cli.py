"""
End-to-end tests of the command-line pipelines
"""
import json

import numpy as np
import pytest

from main import RenegeLDPCli


def run_cli(capsys, *argv):
    status = RenegeLDPCli().run(list(argv))
    out = capsys.readouterr().out
    return status, json.loads(out)


def test_decay_rate(capsys, output_dir):
    status, result = run_cli(capsys, "decay-rate", "--lambda", "2", "--mu", "1", "--gamma", "2",
                             "--output-dir", str(output_dir))
    assert status == 0
    assert result["c_gamma"] == pytest.approx(0.1597084, abs=1e-6)
    assert result["z_gamma"] == pytest.approx(0.7320508, abs=1e-7)
    assert result["provenance"]["command"] == "decay-rate"
    assert result["provenance"]["config"]["gamma"] == 2.0


def test_decay_rate_profile_table(capsys, output_dir):
    status, result = run_cli(capsys, "decay-rate", "--lambda", "2", "--mu", "1", "--gamma", "2",
                             "--gammas", "0,1,2", "--output-dir", str(output_dir))
    assert status == 0
    table = np.loadtxt(result["profile_file"], delimiter=",", skiprows=1)
    assert table.shape == (3, 3)
    assert table[1, 1] == pytest.approx(0.0, abs=1e-14)


def test_minimizer_outputs(capsys, output_dir):
    status, result = run_cli(capsys, "minimizer", "--lambda", "2", "--mu", "1", "--theta", "1", "--x0", "1",
                             "--gamma", "2", "--T", "10", "--grid-size", "2001", "--output-dir", str(output_dir))
    assert status == 0
    with open(result["file"]) as fh:
        assert fh.readline().strip() == "t,xi,zeta,phi1,phi2,phi3"
    data = np.loadtxt(result["file"], delimiter=",", skiprows=1)
    assert data[-1, 2] == pytest.approx(20.0, rel=1e-7)
    assert result["optimality"]["passed"]
    report = json.loads((output_dir / "minimizer.json").read_text())
    assert report["provenance"]["config"]["T"] == 10.0
    assert report["cost"]["total"] == pytest.approx(result["cost"]["total"])


def test_paradox_check(capsys, output_dir):
    status, result = run_cli(capsys, "paradox-check", "--lambda", "2", "--mu", "1", "--gamma", "2", "--T", "200",
                             "--thetas", "0.5,1,2", "--horizons", "20,200", "--output-dir", str(output_dir))
    assert status == 0
    assert result["max_relative_spread"] < 0.03
    assert len({row["decay_rate"] for row in result["theta_rows"]}) == 1
    shares = [row["reneging_share"] for row in result["horizon_rows"]]
    assert shares[1] < shares[0]


def test_fluid_is_byte_identical(capsys, output_dir):
    argv = ["fluid", "--lambda", "2", "--mu", "1", "--x0", "0.5", "--T", "3", "--grid-size", "301",
            "--output-dir", str(output_dir)]
    _, first = run_cli(capsys, *argv)
    content = (output_dir / "fluid.csv").read_bytes()
    _, second = run_cli(capsys, *argv)
    assert (output_dir / "fluid.csv").read_bytes() == content
    assert first == second
    assert first["integrator_gap"] < 1e-8


def test_config_file_merges_with_flags(capsys, output_dir, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"lambda": 2.0, "mu": 1.0, "gamma": 5.0, "x0": 1.0}))
    status, result = run_cli(capsys, "decay-rate", "--config", str(config), "--gamma", "2",
                             "--output-dir", str(output_dir))
    assert status == 0
    assert result["provenance"]["config"]["gamma"] == 2.0
    assert result["provenance"]["config"]["x0"] == 1.0
    assert result["c_gamma"] == pytest.approx(0.1597084, abs=1e-6)


def test_unknown_config_key(capsys, output_dir, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"lambda": 2.0, "mu": 1.0, "gamma": 2.0, "colour": "blue"}))
    status, result = run_cli(capsys, "decay-rate", "--config", str(config), "--output-dir", str(output_dir))
    assert status == 2
    assert result["error"] == "ConfigInvalid"


def test_missing_required_option(capsys, output_dir):
    status, result = run_cli(capsys, "minimizer", "--lambda", "2", "--mu", "1", "--gamma", "2",
                             "--output-dir", str(output_dir))
    assert status == 2
    assert result["error"] == "ConfigInvalid"
    assert result["details"]["missing"] == ["T"]


def test_parameter_error_exit_status(capsys, output_dir):
    status, result = run_cli(capsys, "minimizer", "--lambda", "1", "--mu", "2", "--gamma", "2", "--T", "10",
                             "--output-dir", str(output_dir))
    assert status == 2
    assert result["error"] == "LambdaLessThanMu"


def test_numerics_error_exit_status(capsys, output_dir):
    status, result = run_cli(capsys, "oracle", "--lambda", "2", "--mu", "1", "--x0", "1", "--gamma", "2",
                             "--T", "10", "--m-list", "50", "--max-iters", "1", "--output-dir", str(output_dir))
    assert status == 3
    assert result["error"] == "NotConverged"
    assert "gradient_norm" in result["details"]


def test_oracle_refinement_table(capsys, output_dir):
    status, result = run_cli(capsys, "oracle", "--lambda", "2", "--mu", "1", "--x0", "1", "--gamma", "2",
                             "--T", "10", "--m-list", "50,100", "--grid-size", "2001",
                             "--output-dir", str(output_dir))
    assert status == 0
    assert [row["m"] for row in result["rows"]] == [50, 100]
    with open(result["file"]) as fh:
        assert fh.readline().strip() == "m,objective,gap,iterations"


def test_simulate_json_format(capsys, output_dir):
    status, result = run_cli(capsys, "simulate", "--lambda", "2", "--mu", "1", "--x0", "1", "--T", "2",
                             "--n", "20", "--seed", "4", "--format", "json", "--output-dir", str(output_dir))
    assert status == 0
    sample = json.loads((output_dir / "sample_path.json").read_text())
    assert sample["columns"]["event_type"][0] == -1
    assert len(sample["columns"]["t"]) == result["events"] + 1


def test_estimate_both_methods(capsys, output_dir):
    status, result = run_cli(capsys, "estimate", "--lambda", "2", "--mu", "1", "--x0", "1", "--gamma", "1.3",
                             "--T", "5", "--n", "10", "--replications", "200", "--grid-size", "1001",
                             "--output-dir", str(output_dir))
    assert status == 0
    assert result["threshold"] == 65
    assert 0 <= result["naive"]["p_hat"] <= 1
    assert result["importance"]["replications_used"] == 200


def test_sweep_table(capsys, output_dir):
    status, result = run_cli(capsys, "sweep", "--lambda", "2", "--mu", "1", "--x0", "1", "--gamma", "1.5",
                             "--T", "5", "--n-list", "5,10", "--replications", "200", "--grid-size", "1001",
                             "--output-dir", str(output_dir))
    assert status == 0
    assert [row["n"] for row in result["rows"]] == [5, 10]
    with open(result["file"]) as fh:
        assert fh.readline().strip() == "n,p_hat,ci95,log_decay,ess,reference,t_times_c"


def test_decay_rate_rejects_subcritical_rates(capsys, output_dir):
    status, result = run_cli(capsys, "decay-rate", "--lambda", "1", "--mu", "2", "--gamma", "0.5",
                             "--output-dir", str(output_dir))
    assert status == 2
    assert result["error"] == "LambdaLessThanMu"
    assert "c_gamma" not in result
