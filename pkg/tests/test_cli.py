import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from lmgsmf.cli import RunConfig, main
from lmgsmf.output import parse_timeseries


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_hf_scan_double_well(capsys):
    code, out, _ = run(["hf-scan", "--n", "40", "--chi", "5", "--phi", "0",
                        "--alpha-range", "-1.5708:1.5708:400"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "alpha,phi,energy" and len(lines) == 401
    energy = np.array([float(x.split(",")[2]) for x in lines[1:]])
    alpha = np.array([float(x.split(",")[0]) for x in lines[1:]])
    assert energy.min() == pytest.approx(-52, abs=0.05)
    assert abs(alpha[np.argmin(energy)]) == pytest.approx(0.5 * math.acos(0.2), abs=0.01)
    assert energy[199] > energy.min() + 30  # barrier at alpha ~ 0


def test_tdhf_constant_at_saddle(tmp_path, capsys):
    path = tmp_path / "tdhf.csv"
    code, _, _ = run(["tdhf", "--n", "40", "--chi", "5", "--t-end", "50", "--out", str(path)], capsys)
    assert code == 0
    rows = parse_timeseries(path.read_text())
    assert len(rows) == 501 and rows[-1]["t"] == pytest.approx(50)
    assert {(r["Jz"], r["var_x"], r["var_y"], r["var_z"]) for r in rows} == {(-20.0, 10.0, 10.0, 0.0)}


def test_tdhf_custom_start(capsys):
    code, out, _ = run(["tdhf", "--chi", "5", "--t-end", "1", "--j0", "0.05,0,-0.5"], capsys)
    assert code == 0
    rows = parse_timeseries(out)
    assert rows[0]["Jx"] == pytest.approx(2.0) and rows[-1]["Jz"] != -20.0


def test_exact_json(capsys):
    code, out, _ = run(["exact", "--chi", "1.8", "--t-end", "1", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["metadata"]["solver"] == "exact"
    assert doc["records"][0]["var_x"] == 10.0 and len(doc["records"]) == 11


def test_smf_writes_plot_script(tmp_path, capsys):
    data, script = tmp_path / "smf.csv", tmp_path / "smf.gp"
    code, _, err = run(["smf", "--traj", "2000", "--t-end", "1", "--out", str(data),
                        "--plot-script", str(script)], capsys)
    assert code == 0 and "drift" in err
    assert str(data) in script.read_text()


def test_compare_subcritical_small(capsys):
    code, out, err = run(["compare", "--n", "40", "--chi", "0.5", "--t-end", "2", "--traj", "20000",
                          "--seed", "42", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["summary"]["max_deviation"]["Jz"] < 0.5
    assert doc["summary"]["late_window"] is None
    assert "max |exact - smf|" in err


def test_compare_explicit_window_outside_range_is_error(capsys):
    code, _, err = run(["compare", "--traj", "100", "--t-end", "1", "--late-window", "10:50"], capsys)
    assert code == 1 and "outside" in err


@pytest.mark.parametrize("argv, fragment", [
    (["smf", "--bogus"], "unrecognized"),
    (["smf", "--out-interval", "0.015"], "multiple of dt"),
    (["exact", "--n", "1"], "n_particles"),
    (["smf", "--traj", "1"], "at least 2"),
    (["smf", "--scheme", "rk3"], "invalid choice"),
    (["hf-scan", "--alpha-range", "1:0:10"], "alpha range"),
    (["hf-scan", "--alpha-range", "0:1"], "expected 3 values"),
    (["exact", "--dt", "-1"], "dt must be positive"),
    (["nope"], "invalid choice"),
])
def test_config_errors_exit_1(argv, fragment, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert fragment in err and len(err.strip().splitlines()) == 1


def test_numerical_failure_exits_2(capsys):
    code, _, err = run(["tdhf", "--chi", "5", "--t-end", "1", "--j0", "1e200,1e200,1e200"], capsys)
    assert code == 2 and "non-finite" in err


def test_verify(capsys):
    code, out, _ = run(["verify"], capsys)
    assert code == 0 and "FAIL" not in out and out.count("PASS") >= 8


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({
        "params": {"n_particles": 10, "chi": 1.8},
        "integrator": {"t_end": 0.5},
        "output": {"format": "json"},
    }))
    code, out, _ = run(["exact", "--config", str(cfg), "--chi", "0.5"], capsys)
    meta = json.loads(out)["metadata"]
    assert code == 0
    assert meta["params"] == {"n_particles": 10, "chi": 0.5, "epsilon": 1.0}
    assert meta["t_end"] == 0.5


@pytest.mark.parametrize("content, fragment", [
    ("params: {n_particles: 10, bogus: 1}\n", "unknown key config.params.bogus"),
    ("params: [1, 2]\n", "must be a mapping"),
    (":\n  - [\n", "not valid YAML"),
    ("ensemble: {n_trajectories: 2.5}\n", "integer"),
])
def test_bad_config_files(tmp_path, capsys, content, fragment):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(content)
    code, _, err = run(["smf", "--config", str(cfg)], capsys)
    assert code == 1 and fragment in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["exact", "--config", str(tmp_path / "none.yaml")], capsys)
    assert code == 1 and "none.yaml" in err


def test_run_config_round_trip():
    cfg = RunConfig.from_dict({
        "solver": "compare",
        "params": {"n_particles": 12, "chi": 1.8, "epsilon": 2.0},
        "integrator": {"scheme": "rk4", "dt": 0.005, "t_end": 3.0},
        "output_interval": 0.05,
        "ensemble": {"n_trajectories": 500, "master_seed": 7, "antithetic": True, "workers": 2},
        "compare": {"early": [0.0, 1.0], "late": None},
        "output": {"path": "x.json", "format": "json", "plot_script": None},
    })
    again = RunConfig.from_dict(yaml.safe_load(yaml.safe_dump(cfg.to_dict())))
    assert again == cfg and again.to_dict() == cfg.to_dict()
    assert len(cfg.sample_times) == 61 and cfg.sample_times[-1] == pytest.approx(3.0)


def test_identical_runs_are_byte_identical(tmp_path, capsys):
    paths = [tmp_path / f"run{k}.csv" for k in range(2)]
    for path, workers in zip(paths, ("1", "3")):
        assert run(["smf", "--traj", "20000", "--t-end", "0.5", "--seed", "9", "--workers", workers,
                    "--out", str(path)], capsys)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lmgsmf", "hf-scan", "--alpha-range", "0:1:3"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[0] == "alpha,phi,energy"
