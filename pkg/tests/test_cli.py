import json

import numpy as np
import pytest

from critsense import cli


def _run(tmp_path, cfg, command, extra_args=()):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    argv = [command, "--config", str(cfg_path), "--out", str(out),
            *extra_args]
    rc = cli.main(argv)
    return rc, out


def test_unknown_config_key_rejected(tmp_path, capsys):
    rc, _ = _run(tmp_path, {"bogus": 1.0}, "steady-state")
    assert rc == 2
    assert "bogus" in capsys.readouterr().err


def test_wrong_type_rejected(tmp_path, capsys):
    rc, _ = _run(tmp_path, {"eta": "big"}, "steady-state")
    assert rc == 2


def test_fi_requires_minimum_sample(tmp_path, capsys):
    cfg = {"eta": 2.0, "t_final": 1.0, "dt": 0.01, "n_traj": 10}
    rc, _ = _run(tmp_path, cfg, "fi")
    assert rc == 2
    assert "n_traj" in capsys.readouterr().err


def test_steady_state_outputs(tmp_path):
    cfg = {"etas": [2.0, 4.0], "kappa": 0.1, "n_cutoff": 12}
    rc, out = _run(tmp_path, cfg, "steady-state")
    assert rc == 0
    lines = (out / "steady_state.csv").read_text().strip().splitlines()
    assert lines[0] == "eta,g,kappa,quantity,value,residual,n_cutoff"
    assert len(lines) == 3
    manifest = json.loads((out / "steady-state_manifest.json").read_text())
    assert manifest["tool"] == "critsense"
    assert manifest["config_hash"] == cli._config_hash(cfg)


def test_gap_fits_exponent_with_enough_sizes(tmp_path):
    cfg = {"etas": [4.0, 6.0, 10.0, 16.0], "kappa": 0.1, "n_cutoff": 16}
    rc, out = _run(tmp_path, cfg, "gap")
    assert rc == 0
    manifest = json.loads((out / "gap_manifest.json").read_text())
    fit = manifest["fitted_exponent"]
    # small sizes carry corrections to scaling, so only gate loosely here
    assert -1.7 < fit["value"] < -0.8
    assert fit["r_squared"] > 0.95


def test_qfi_csv_shape(tmp_path):
    cfg = {"eta": 3.0, "t_final": 5.0, "n_cutoff": 10,
           "t_grid": [0.0, 2.5, 5.0]}
    rc, out = _run(tmp_path, cfg, "qfi")
    assert rc == 0
    lines = (out / "qfi.csv").read_text().strip().splitlines()
    assert len(lines) == 4
    assert float(lines[1].split(",")[4]) == pytest.approx(0.0, abs=1e-10)


def test_fi_deterministic_reruns(tmp_path):
    cfg = {"eta": 2.0, "n_cutoff": 8, "t_final": 5.0, "dt": 0.01,
           "n_traj": 100}
    rc1, out1 = _run(tmp_path, cfg, "fi", ("--seed", "7"))
    text1 = (out1 / "fi.csv").read_text()
    (out1 / "fi.csv").unlink()
    rc2, out2 = _run(tmp_path, cfg, "fi", ("--seed", "7"))
    assert rc1 == rc2 == 0
    assert (out2 / "fi.csv").read_text() == text1


def test_collapse_outputs(tmp_path):
    # build a synthetic information CSV that collapses as t/eta, I/eta^2
    rows = ["eta,g,kappa,t,value,stderr,method,n_traj,delta"]
    for eta in (5.0, 10.0, 20.0):
        ts = np.geomspace(0.1, 10.0, 20) * eta
        for t in ts:
            rows.append(f"{eta},1.0,0.1,{t},{eta**2 * (t / eta):.12g},"
                        "0,synthetic,0,")
    csv_path = tmp_path / "curves.csv"
    csv_path.write_text("\n".join(rows) + "\n")
    cfg = {"curves_csv": str(csv_path), "x_exponent": 1.0, "y_exponent": 2.0}
    rc, out = _run(tmp_path, cfg, "collapse")
    assert rc == 0
    assert (out / "collapse.svg").exists()
    report = json.loads((out / "collapse.json").read_text())
    assert report["quality"] < 1e-6


def test_correlator_csv(tmp_path):
    cfg = {"eta": 2.0, "kappa": 0.3, "g": 0.7, "n_cutoff": 3,
           "tau_max": 1.0, "s_max": 1.0, "n_points": 3}
    rc, out = _run(tmp_path, cfg, "correlator")
    assert rc == 0
    lines = (out / "correlator.csv").read_text().strip().splitlines()
    assert lines[0].startswith("eta,g,tau,s") or lines[0].startswith("eta,g")
    assert len(lines) == 1 + 9
