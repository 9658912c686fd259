import csv
import json

import numpy as np
import pytest

from vqsim.cli import main, preset_names

PRESETS = {"fig3-ideal", "fig3-dissipative", "fig3-dissipative-desk", "single-qubit-decay", "svd-jump-demo"}


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_presets_shipped(capsys):
    assert set(preset_names()) == PRESETS
    assert main(["presets"]) == 0
    listed = {line.split()[0] for line in capsys.readouterr().out.splitlines()}
    assert listed == PRESETS


def test_preset_print_and_unknown(capsys):
    assert main(["presets", "fig3-ideal"]) == 0
    assert json.loads(capsys.readouterr().out)["task"] == "real-time"
    assert main(["presets", "nope"]) == 1


def test_validate_fig3(capsys):
    for name in ("fig3-dissipative", "fig3-dissipative-desk", "fig3-ideal"):
        assert main(["validate", "--config", name]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "OK, 54 parameters, 6 qubits, 1200 steps"


def test_validate_missing_ansatz_file(tmp_path, capsys):
    cfg = {"task": "real-time", "model": {"num_qubits": 1, "hamiltonian": "X0"}, "ansatz": "nowhere/ansatz.json", "T": 1, "dt": 0.01}
    assert main(["validate", "--config", write_config(tmp_path, cfg)]) == 1
    out = capsys.readouterr().out
    assert out.startswith("ERROR") and str(tmp_path / "nowhere" / "ansatz.json") in out


def test_validate_rate_warning(tmp_path, capsys):
    cfg = {"task": "open-system", "model": {"num_qubits": 1, "hamiltonian": "0*Z0", "lindblad": ["2*Z0"]}, "T": 1, "dt": 0.05}
    assert main(["validate", "--config", write_config(tmp_path, cfg)]) == 0
    assert any(line.startswith("WARNING gamma*dt") for line in capsys.readouterr().out.splitlines())


def test_validate_field_diagnostics(tmp_path, capsys):
    cfg = {"task": "real-time", "model": {"num_qubits": 1, "hamiltonian": "X7"}, "T": 1, "dt": 0.01}
    assert main(["validate", "--config", write_config(tmp_path, cfg)]) == 1
    assert "model.hamiltonian" in capsys.readouterr().out
    (tmp_path / "broken.json").write_text('{"task": "real-time",\n "T": }')
    assert main(["validate", "--config", str(tmp_path / "broken.json")]) == 1
    assert "line 2" in capsys.readouterr().out


def test_run_config_error_exit_code(tmp_path, capsys):
    cfg = {"task": "teleport"}
    assert main(["run", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    assert "task" in capsys.readouterr().err


def test_run_numerical_abort_exit_code(tmp_path, capsys):
    # -I passes through zero at s = 1/2 along the normalized path
    cfg = {"task": "linalg-multiply", "variant": "normalized", "num_qubits": 1, "matrix": "-1*I"}
    assert main(["run", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3
    assert "numerical abort" in capsys.readouterr().err


def test_run_is_deterministic(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["run", "--config", "single-qubit-decay", "--n-trajectories", "40", "--out", str(out)]) == 0
        outs.append((out / "aggregate.csv").read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "c"
    assert main(["run", "--config", "single-qubit-decay", "--n-trajectories", "40", "--seed", "2", "--out", str(other)]) == 0
    assert (other / "aggregate.csv").read_bytes() != outs[0]


def test_workers_do_not_change_output(tmp_path):
    args = ["run", "--config", "single-qubit-decay", "--n-trajectories", "16"]
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--workers", "2", "--out", str(tmp_path / "two")]) == 0
    assert (tmp_path / "one" / "aggregate.csv").read_bytes() == (tmp_path / "two" / "aggregate.csv").read_bytes()


def test_manifest_contents(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", "single-qubit-decay", "--n-trajectories", "10", "--seed", "5", "--out", str(out), "--trajectories"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["config"]["n_trajectories"] == 10
    assert manifest["config"]["dt"] == 0.01 and manifest["config"]["model"]["lindblad"]
    assert {"vqsim", "numpy", "scipy", "python"} <= set(manifest["versions"])
    assert manifest["wall_time_seconds"] > 0
    assert len(list((out / "trajectories").glob("traj_*.csv"))) == 10
    assert header(out / "trajectories" / "jumps.csv") == ["trajectory", "t", "channel"]


def test_csv_uses_17_digits(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", "single-qubit-decay", "--n-trajectories", "5", "--out", str(out)]) == 0
    row = rows(out / "aggregate.csv")[7]
    assert row["t"] == f"{0.07:.17g}"


def test_fig3_dissipative_columns(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", "fig3-dissipative", "--n-trajectories", "2", "--out", str(out)]) == 0
    assert header(out / "aggregate.csv")[:3] == ["t", "C_mean", "C_stderr"]
    data = rows(out / "aggregate.csv")
    assert len(data) == 1201
    np.testing.assert_allclose([float(r["t"]) for r in data], np.linspace(0, 6, 1201), atol=1e-15)


def test_fig3_ideal_series(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", "fig3-ideal", "--out", str(out)]) == 0
    cols = header(out / "timeseries.csv")
    assert cols[0] == "t" and "C" in cols and "theta_54" in cols
    data = rows(out / "timeseries.csv")
    assert float(data[0]["C"]) == pytest.approx(1)
    assert max(abs(float(r["C"]) - float(r["C_exact"])) for r in data) <= 0.02


def test_svd_demo(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", "svd-jump-demo", "--out", str(out)]) == 0
    summary = json.loads((out / "manifest.json").read_text())["summary"]
    assert summary["fidelity_vs_dense"] >= 0.99
    assert summary["route"]["T_D"] == pytest.approx(6)


def test_resources_all_ones(capsys):
    ones = ["B_norm_max=1", "Delta_max=1", "Delta3_max=1", "T=1", "eps_I=1", "eps_A=1"]
    assert main(["resources", "--json"] + [a for kv in ones for a in ("--set", kv)]) == 0
    est = json.loads(capsys.readouterr().out)["estimates"]
    assert est["N_S"] == 1 and est["N_A"] == 1 and est["dt"] == 1
    assert est["N_I"] == 6 and est["N_tot"] == 6


def test_resources_text_and_errors(tmp_path, capsys):
    assert main(["resources", "--set", "N_P=54"]) == 0
    assert any(line.split() == ["N_I", "3080"] for line in capsys.readouterr().out.splitlines())
    assert main(["resources", "--set", "bogus=1"]) == 2
    assert main(["resources", "--set", "eps_I=0"]) == 2
    path = write_config(tmp_path, {"inputs": {"T": 6, "L_infinity_norms": [1, 1, 1, 1, 1, 1]}})
    assert main(["resources", "--config", path, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["estimates"]["N_jump_bound"] == 36


def test_run_resources_task(tmp_path):
    cfg = {"task": "resources", "inputs": {"N_P": 54}}
    out = tmp_path / "o"
    assert main(["run", "--config", write_config(tmp_path, cfg), "--out", str(out)]) == 0
    assert json.loads((out / "resources.json").read_text())["N_I"] == 3080


def test_general_task(tmp_path):
    cfg = {"task": "general", "num_qubits": 1, "terms": [{"operator": "-1j*X0", "source": "self"}], "T": 0.5, "dt": 0.001, "observables": {"Z": "Z0"}}
    out = tmp_path / "o"
    assert main(["run", "--config", write_config(tmp_path, cfg), "--out", str(out)]) == 0
    last = rows(out / "timeseries.csv")[-1]
    assert float(last["Z"]) == pytest.approx(np.cos(1.0), abs=1e-3)
