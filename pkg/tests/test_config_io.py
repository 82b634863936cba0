import json
import warnings

import numpy as np
import pytest

from phononwire.config import ConfigError, apply_override, load_config, parse_config_text
from phononwire.core import TWO_PI, ModelError, SpectrumKind
from phononwire.io import (DuplicateFrequencyWarning, ResultEnvelope, fixture_dir,
                           load_spectrum_csv, quantity, read_envelope, write_columns,
                           write_plot_file)


def test_empty_config_uses_defaults():
    cfg = parse_config_text("")
    sys = cfg.transducer()
    assert sys.kappa / TWO_PI == pytest.approx(1.0e9)
    assert len(cfg.waveguide()) == 0
    assert cfg.photon_numbers() == [1100.0]


def test_minimal_config_converts_hz_to_rad_s():
    cfg = parse_config_text("system:\n  gamma_i_hz: 2.0e5\n  omega_m_hz: 4.4e9\n"
                            "waveguide:\n  comb: {n_modes: 3, spacing_hz: 1.6e6, f_hz: 3.0e5,"
                            " gamma_i_hz: 2.2e4}\n")
    sys = cfg.transducer()
    assert sys.gamma_i == pytest.approx(TWO_PI * 2.0e5)
    wg = cfg.waveguide()
    assert len(wg) == 3
    np.testing.assert_allclose(wg.f_k, TWO_PI * 3.0e5)


def test_negative_rate_names_field():
    with pytest.raises(ConfigError, match="gamma_i"):
        parse_config_text("system:\n  gamma_i_hz: -5.0\n")


def test_bare_frequency_key_is_unit_mismatch():
    with pytest.raises(ConfigError, match="unit-suffix mismatch for system.kappa"):
        parse_config_text("system:\n  kappa: 1.0e9\n")


def test_wrong_unit_suffix():
    with pytest.raises(ConfigError, match="unit-suffix mismatch.*g0_hz"):
        parse_config_text("system:\n  g0_rad_s: 4.0e6\n")


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key system.colour"):
        parse_config_text("system:\n  colour: red\n")


def test_parse_error_reports_location():
    with pytest.raises(ConfigError, match="line 2, column 14"):
        parse_config_text("system:\n  kappa_hz: a: 2\n")


def test_wrong_type():
    with pytest.raises(ConfigError, match="n_points"):
        parse_config_text("grid:\n  n_points: many\n")


def test_bath_count_mismatch():
    cfg = parse_config_text("baths:\n  n_wg: [1.0, 2.0]\n")
    with pytest.raises(ConfigError, match="2 entries for 3 modes"):
        cfg.baths(3)


def test_override():
    cfg = parse_config_text("")
    apply_override(cfg, "system.g0_hz", "7.0e5")
    assert cfg.transducer().g0 == pytest.approx(TWO_PI * 7.0e5)
    assert cfg.overrides == {"system.g0_hz": 7.0e5}
    with pytest.raises(ConfigError, match="gamma_i"):
        apply_override(cfg, "system.gamma_i_hz", "-1")
    with pytest.raises(ConfigError, match="unknown config block"):
        apply_override(cfg, "nothing.x", "1")


def test_load_keeps_exact_bytes(tmp_path):
    text = "# comment\r\nsystem:\r\n  g0_hz: 6.5e5   # trailing\r\n"
    p = tmp_path / "c.yaml"
    p.write_bytes(text.encode())
    assert load_config(p).text == text
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.yaml")


def write_csv(path, text):
    path.write_text(text)
    return path


def test_five_row_coherent_csv(tmp_path):
    p = write_csv(tmp_path / "c.csv", "frequency_hz,phase_rad\n"
                  "1.0e9,0.1\n1.1e9,0.2\n1.2e9,0.3\n1.3e9,0.2\n1.4e9,0.1\n")
    ds = load_spectrum_csv(p, "coherent", n_c=500.0)
    assert ds.omega.size == 5 and ds.n_c == 500.0
    np.testing.assert_allclose(ds.omega, TWO_PI * np.array([1.0, 1.1, 1.2, 1.3, 1.4]) * 1e9)


def test_unsorted_wrapped_rows_are_sorted_then_unwrapped(tmp_path):
    p = write_csv(tmp_path / "c.csv", "frequency_hz,phase_rad\n"
                  "3,-3.0\n1,2.8\n2,3.1\n")
    ds = load_spectrum_csv(p, "coherent", n_c=1.0)
    np.testing.assert_allclose(ds.phase, [2.8, 3.1, TWO_PI - 3.0])


def test_thermal_csv_kind(tmp_path):
    p = write_csv(tmp_path / "t.csv", "psd,frequency_hz\n2.0,5\n3.0,6\n")
    spec = load_spectrum_csv(p, "thermal")
    assert spec.kind is SpectrumKind.THERMAL_PSD
    np.testing.assert_allclose(spec.values, [2.0, 3.0])


def test_duplicates_collapse_with_warning(tmp_path):
    p = write_csv(tmp_path / "t.csv", "frequency_hz,psd\n1,2.0\n2,4.0\n2,6.0\n3,1.0\n")
    with pytest.warns(DuplicateFrequencyWarning, match="1 duplicate"):
        spec = load_spectrum_csv(p, "thermal")
    np.testing.assert_allclose(spec.values, [2.0, 5.0, 1.0])


def test_missing_column(tmp_path):
    p = write_csv(tmp_path / "t.csv", "frequency_hz,power\n1,2\n")
    with pytest.raises(ModelError, match="missing column.*psd"):
        load_spectrum_csv(p, "thermal")


def test_non_numeric_row_is_reported(tmp_path):
    p = write_csv(tmp_path / "t.csv", "frequency_hz,psd\n1,2\n2,3\n3,abc\n")
    with pytest.raises(ModelError, match="at data row 3"):
        load_spectrum_csv(p, "thermal")


def test_coherent_needs_photon_number(tmp_path):
    p = write_csv(tmp_path / "c.csv", "frequency_hz,phase_rad\n1,0\n2,0\n")
    with pytest.raises(ModelError, match="n_c"):
        load_spectrum_csv(p, "coherent")
    with pytest.raises(ModelError, match="unknown spectrum kind"):
        load_spectrum_csv(p, "optical")


def test_writers_roundtrip(tmp_path):
    x, y = np.linspace(0, 1, 4), np.arange(4.0)
    write_columns(tmp_path / "a.csv", ["frequency_hz", "psd"], x, y)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spec = load_spectrum_csv(tmp_path / "a.csv", "thermal")
    np.testing.assert_allclose(spec.values, y)
    write_plot_file(tmp_path / "a.dat", x, y, "t_s", "f")
    lines = (tmp_path / "a.dat").read_text().splitlines()
    assert lines[0] == "# t_s f"
    np.testing.assert_allclose(np.loadtxt(tmp_path / "a.dat"), np.column_stack([x, y]))


def test_envelope_roundtrip(tmp_path):
    env = ResultEnvelope("metrics", "a: 1\r\n", "c.yaml", 7, {"metrics.length": 0.002})
    env.outputs = {"fsr": quantity(np.float64(1.5), "Hz"), "v": quantity(np.ones(2), "m")}
    env.finish()
    d = read_envelope(env.write(tmp_path / "r.json"))
    assert d["config"]["text"] == "a: 1\r\n"
    assert d["config"]["seed"] == 7
    assert d["outputs"]["v"] == {"value": [1.0, 1.0], "units": "m"}
    assert d["timing"]["units"] == "s" and d["timing"]["value"] >= 0
    assert json.loads(json.dumps(d)) == d


def test_fixture_is_bundled():
    names = {p.name for p in fixture_dir().iterdir()}
    assert {"fixture_fit.yaml", "fixture_generate.yaml", "coherent_nc600.csv"} <= names
