import hashlib
import shutil
import subprocess
import sys

import numpy as np
import pytest

from phononwire.cli import main
from phononwire.io import fixture_dir, read_envelope


def run(tmp_path, command, config_text=None, *extra):
    argv = [command, "--out", str(tmp_path / "out")]
    if config_text is not None:
        cfg = tmp_path / "run.yaml"
        cfg.write_text(config_text)
        argv += ["--config", str(cfg)]
    code = main(argv + list(extra))
    return code, read_envelope(tmp_path / "out" / "result.json")


def test_metrics_command(tmp_path):
    text = "metrics:\n  v_g: 6800.0\n  length: 3.0e-3\n  gamma_k_i_hz: 2.2e4\n  n_i: 87\n"
    code, env = run(tmp_path, "metrics", text)
    assert code == 0 and env["status"] == "ok"
    out = env["outputs"]
    assert out["fsr"]["value"] == pytest.approx(6800 / 6e-3)
    assert out["fsr"]["units"] == "Hz"
    assert out["roundtrip"]["value"] == pytest.approx(6e-3 / 6800)
    assert env["config"]["text"] == text
    assert env["timing"]["units"] == "s"


def test_config_text_is_byte_identical(tmp_path):
    text = "# keep me\r\nmetrics:\r\n  length: 2.0e-3   # trailing\r\n"
    cfg = tmp_path / "raw.yaml"
    cfg.write_bytes(text.encode())
    assert main(["metrics", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert read_envelope(tmp_path / "result.json")["config"]["text"].encode() == text.encode()


def test_zero_baths_give_zero_psd(tmp_path):
    text = ("waveguide:\n  comb: {n_modes: 3, spacing_hz: 1.6e6, f_hz: 3.0e5,"
            " gamma_i_hz: 2.2e4}\nbaths: {n_local: 0.0, n_wg: 0.0}\n"
            "drive: {n_c: [800]}\ngrid: {n_points: 201}\n")
    code, env = run(tmp_path, "simulate-thermal", text)
    assert code == 0
    data = np.loadtxt(tmp_path / "out" / "thermal_nc800.csv", delimiter=",", skiprows=1)
    assert data.shape == (201, 2)
    assert np.all(data[:, 1] == 0.0)
    assert env["outputs"]["traces"][0]["n_localized"]["value"] == 0.0


def test_simulate_then_fit_thermal(tmp_path):
    model = ("waveguide:\n  comb: {n_modes: 3, spacing_hz: 1.6e6, f_hz: 3.1e5,"
             " gamma_i_hz: 2.2e4, offset_hz: 3.0e5}\n")
    text = model + ("baths: {n_local: 87.0, n_wg: [60.0, 90.0, 120.0]}\n"
                    "drive: {n_c: [1100]}\ngrid: {half_width_hz: 5.0e6, n_points: 2001}\n")
    assert run(tmp_path, "simulate-thermal", text)[0] == 0
    fit = model + f"thermal_fit:\n  path: {tmp_path / 'out' / 'thermal_nc1100.csv'}\n" \
                  "  n_c: 1100\n  n_i: 87.0\n"
    (tmp_path / "fit").mkdir()
    code, env = run(tmp_path / "fit", "fit-thermal", fit)
    assert code == 0
    got = env["outputs"]["bath_occupancies"]
    assert got["localized"]["value"] == pytest.approx(87.0, rel=1e-6)
    assert got["wg2"]["value"] == pytest.approx(120.0, rel=1e-6)
    assert "gamma_heating" in env["outputs"]


def test_emit_plots(tmp_path):
    code, _ = run(tmp_path, "dephasing", "dephasing: {n_points: 11}\n", "--emit-plots")
    assert code == 0
    lines = (tmp_path / "out" / "fidelity.dat").read_text().splitlines()
    assert lines[0] == "# time_s fidelity"
    assert len(lines) == 12


def test_eigen_report_command(tmp_path):
    text = ("waveguide:\n  comb: {n_modes: 3, spacing_hz: 1.6e6, f_hz: 3.0e5,"
            " gamma_i_hz: 2.2e4, offset_hz: 3.0e5}\ndrive: {n_c: [0, 1100]}\n")
    code, env = run(tmp_path, "eigen-report", text)
    assert code == 0
    assert len(env["outputs"]["reports"]) == 2


def test_disorder_ensemble_command(tmp_path):
    text = "seed: 4\ndisorder: {length: 5.0e-4, n_realizations: 3, gamma_e_hz: 3.86e5}\n"
    code, env = run(tmp_path, "disorder-ensemble", text)
    assert code == 0
    assert env["outputs"]["seeds"]["value"] == [4, 6]
    assert (tmp_path / "out" / "spacing_hist.csv").exists()


def test_seed_flag_overrides_config(tmp_path):
    text = "seed: 4\ndisorder: {length: 5.0e-4, n_realizations: 2}\n"
    code, env = run(tmp_path, "disorder-ensemble", text, "--seed", "10")
    assert code == 0 and env["config"]["seed"] == 10


def test_set_override_recorded(tmp_path):
    code, env = run(tmp_path, "metrics", "", "--set", "metrics.length=2.0e-3")
    assert code == 0
    assert env["config"]["overrides"] == {"metrics.length": 2.0e-3}
    assert env["outputs"]["fsr"]["value"] == pytest.approx(6800 / 4e-3)


def test_bad_config_exits_nonzero_with_message(tmp_path, capsys):
    code, env = run(tmp_path, "metrics", "system:\n  gamma_i_hz: -3\n")
    assert code != 0
    assert "gamma_i" in capsys.readouterr().err
    assert env["status"] == "error"


def test_stage_is_named_in_errors(tmp_path):
    # valid config, but the chain is shorter than two lattice sites
    code, env = run(tmp_path, "disorder-ensemble", "disorder: {length: 5.0e-7, a: 4.5e-7}\n")
    assert code != 0
    assert env["error"].startswith("disorder.ensemble_stats")


def test_missing_data_file(tmp_path, capsys):
    text = "fit:\n  datasets:\n    - {path: nowhere.csv, n_c: 100}\n"
    code, _ = run(tmp_path, "fit-coherent", text)
    assert code != 0
    assert "io.load_spectrum_csv" in capsys.readouterr().err


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_fit_bundled_fixture(tmp_path):
    work = tmp_path / "fixture"
    shutil.copytree(fixture_dir(), work)
    before = {p.name: digest(p) for p in work.iterdir()}
    code = main(["fit-coherent", "--config", str(work / "fixture_fit.yaml"),
                 "--out", str(tmp_path / "out")])
    assert code == 0
    env = read_envelope(tmp_path / "out" / "result.json")
    assert env["outputs"]["converged"]
    trace = env["outputs"]["cost_trace"]["value"]
    assert trace[-1] <= trace[0]
    wg = env["outputs"]["waveguide"]
    np.testing.assert_allclose(wg["f_k"]["value"], [3.4e5, 3.1e5, 2.5e5], rtol=0.05)
    np.testing.assert_allclose(wg["omega_k"]["value"], [4.3914e9, 4.39363e9, 4.3952e9],
                               rtol=0, atol=5e3)
    assert {p.name: digest(p) for p in work.iterdir()} == before
    assert (tmp_path / "out" / "fit_nc600.csv").exists()


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "phononwire.cli", "metrics", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert read_envelope(tmp_path / "result.json")["command"] == "metrics"
    bad = subprocess.run([sys.executable, "-m", "phononwire.cli", "metrics", "--config",
                          str(tmp_path / "absent.yaml"), "--out", str(tmp_path / "bad")],
                         capture_output=True, text=True)
    assert bad.returncode == 2
    assert "not found" in bad.stderr
