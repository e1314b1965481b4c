"""End-to-end tests of the command-line interface.

Every subcommand is exercised in-process through ``main(argv)``: outputs
are byte-stable across reruns (CSV and JSON golden comparisons), stdout
echoes the JSON payload written to disk, figures are rendered unless
suppressed, and each failure class maps to its documented exit code
(0 ok, 2 config/schema, 3 oscillation threshold, 4 non-convergence,
5 inconsistent measurement).
"""

import json
import math
import os

import numpy as np
import pytest

from spinmaser import io
from spinmaser.cli import main
from spinmaser.fitting import exp_decay_model, gaussian_peak
from spinmaser.quantities import GAMMA_E, hz_to_angular
from spinmaser.response import Branch, ResonatorParams, gain_spectrum, reflection
from spinmaser.spins import GaussianProfile, LorentzianProfile, SpinEnsemble

TWO_PI = hz_to_angular(1.0)

OMEGA_R_HZ = 9.8e9

AMPLIFY_CONFIG = """\
[resonator]
omega_r_hz = 9.8e9
kappa_e_hz = 3.0e6
kappa_i_hz = 1.0e6

[ensemble]
profile = "lorentzian"
fwhm_hz = 2.0e6
g_ens_hz = 1.0e6

[baths]
input_t_k = 0.5
spin_t_k = 0.1
internal_t_k = 0.5

[sweep]
start_hz = 9.794e9
stop_hz = 9.806e9
points = 201

[mode]
branch = "amplify"
"""

# kappa_e = kappa_i + kappa_s: the cooling branch absorbs every input
# photon on resonance (critical coupling).
COOL_CRITICAL_CONFIG = AMPLIFY_CONFIG.replace('branch = "amplify"', 'branch = "cool"')

BARE_CONFIG = """\
[resonator]
omega_r_hz = 9.8e9
kappa_e_hz = 1.0e6
kappa_i_hz = 1.0e6

[ensemble]
profile = "none"

[baths]
input_n = 0.0
spin_n = 0.0
internal_n = 0.0

[sweep]
start_hz = 9.795e9
stop_hz = 9.805e9
points = 101
"""

MASER_CHAIN_CONFIG = """\
[chain]
beta = 0.89
g_a_db = 29.394
t_a_k = 100.0
t_0_k = 294.0
omega_hz = 9.8e9
"""

COOLER_CHAIN_CONFIG = MASER_CHAIN_CONFIG.replace("t_a_k = 100.0", "t_a_k = 47.0")

DRIVE_CONFIG = """\
[drive]
power_dbm = -80.0
kappa_e_hz = 0.95e6
kappa_i_hz = 0.891e6
omega_r_hz = 9.8e9
"""

FIELDMAP_HEADER = ["x_m", "y_m", "z_m", "volume_m3", "b1x_t", "b1y_t", "b1z_t", "in_sample"]


def run_cli(capsys, args):
    """Invoke the CLI in-process, returning (exit code, stdout, stderr)."""
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def load_result(out_dir, filename):
    with open(os.path.join(str(out_dir), filename), encoding="utf-8") as handle:
        return json.load(handle)


def read_bytes(path):
    with open(str(path), "rb") as handle:
        return handle.read()


def write_reflection_fixture(path):
    """Noiseless reflection trace with amplitude/phase/delay dressing."""
    res = ResonatorParams(
        kappa_e=TWO_PI * 0.95e6, kappa_i=TWO_PI * 0.891e6, omega_r=TWO_PI * OMEGA_R_HZ
    )
    bare = SpinEnsemble(
        profile=LorentzianProfile(omega_s=res.omega_r, fwhm=0.0), gamma=0.0, g_ens=0.0
    )
    omega = res.omega_r + TWO_PI * np.linspace(-6e6, 6e6, 401)
    bare_r = reflection(res, bare, Branch.AMPLIFY, omega)
    dressing = 0.83 * np.exp(1j * (0.4 + (omega - omega[omega.size // 2]) * 38e-9))
    values = dressing * bare_r
    io.write_csv(str(path), ["freq_hz", "re", "im"],
                 [omega / TWO_PI, values.real, values.imag])


GAIN_SIGMA = TWO_PI * 2.236e6 / (2.0 * math.sqrt(2.0 / math.pi))
GAIN_G_ENS_HZ = 1.54e6

GAIN_FIT_CONFIG = f"""\
[resonator]
omega_r_hz = 9.8e9
kappa_e_hz = 4.0e6
kappa_i_hz = 0.891e6

[ensemble]
profile = "gaussian"
sigma_hz = {GAIN_SIGMA / TWO_PI!r}
"""


def write_gain_fixture(path):
    res = ResonatorParams(
        kappa_e=TWO_PI * 4.0e6, kappa_i=TWO_PI * 0.891e6, omega_r=TWO_PI * OMEGA_R_HZ
    )
    ens = SpinEnsemble(
        profile=GaussianProfile(omega_s=res.omega_r, sigma=GAIN_SIGMA),
        gamma=0.0,
        g_ens=TWO_PI * GAIN_G_ENS_HZ,
    )
    omega = res.omega_r + TWO_PI * np.linspace(-8e6, 8e6, 401)
    gain_db = gain_spectrum(res, ens, Branch.AMPLIFY, omega)[:, 1]
    io.write_csv(str(path), ["freq_hz", "gain_db"], [omega / TWO_PI, gain_db])


LINE_SIGMA_T = 119e-6
LINE_CENTER = TWO_PI * 0.3e6


def write_line_fixture(path):
    omega = TWO_PI * np.linspace(-15e6, 15e6, 401)
    signal = gaussian_peak(omega, LINE_CENTER, GAMMA_E * LINE_SIGMA_T, 1.0, 0.05)
    io.write_csv(str(path), ["b0_t", "signal"], [omega / GAMMA_E, signal])


DECAY_TAU = 6.65e-3


def write_decay_fixture(path):
    time = np.linspace(0.0, 5.0 * DECAY_TAU, 400)
    io.write_csv(str(path), ["time_s", "signal"],
                 [time, exp_decay_model(time, DECAY_TAU, 1.0, 0.05)])


def write_fieldmap(path, b1y_t=1e-9):
    """Uniform transverse field over eight equal cells, half in sample."""
    n = 8
    ones = np.ones(n)
    in_sample = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=float)
    io.write_csv(str(path), FIELDMAP_HEADER,
                 [np.arange(n) * 1e-3, ones * 0.0, ones * 0.0, ones * 1e-9,
                  ones * 0.0, ones * b1y_t, ones * 0.0, in_sample])


ENSEMBLE_CONFIG = """\
[ensemble]
profile = "gaussian"
omega_s_hz = 9.8e9
sigma_hz = 1.4e6
g_ens_hz = 1.54e6
"""


class TestSimulate:
    def test_amplify_summary_matches_closed_form(self, capsys, tmp_path):
        config = write_config(tmp_path, AMPLIFY_CONFIG)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["simulate", "--config", config, "--out", str(out), "--no-plot"]
        )
        assert code == 0
        summary = json.loads(stdout)
        # kappa_s = 4 g^2 / fwhm = 2 MHz, so the on-resonance power gain is
        # ((3 - 1 + 2) / (3 + 1 - 2))^2 = 4, i.e. 6.0206 dB.
        assert summary["kappa_s_hz"] == pytest.approx(2.0e6, rel=1e-12)
        assert summary["center_gain_db"] == pytest.approx(
            10.0 * math.log10(4.0), rel=1e-12
        )
        assert summary["threshold_margin"] == pytest.approx(0.5, rel=1e-12)
        assert summary["gbp_hz"] == pytest.approx(2.0 * summary["fwhm_hz"], rel=1e-12)
        assert summary["branch"] == "amplify"
        assert summary["figure_png"] is None

    def test_amplify_spectra_columns_satisfy_sum_rule(self, capsys, tmp_path):
        config = write_config(tmp_path, AMPLIFY_CONFIG)
        out = tmp_path / "out"
        code, _, _ = run_cli(
            capsys, ["simulate", "--config", config, "--out", str(out), "--no-plot"]
        )
        assert code == 0
        rows = np.genfromtxt(out / "spectra.csv", delimiter=",", names=True)
        assert list(rows.dtype.names) == [
            "omega_hz", "re", "im", "gain_db", "r_in", "r_s", "r_i", "n_out"
        ]
        # amplification: spin emission adds to the reflected power while
        # internal loss drains it, so r_in - r_s + r_i = 1 everywhere
        np.testing.assert_allclose(
            rows["r_in"] - rows["r_s"] + rows["r_i"], np.ones(rows.size), rtol=1e-9
        )
        power = rows["re"] ** 2 + rows["im"] ** 2
        np.testing.assert_allclose(
            rows["gain_db"], 10.0 * np.log10(power), rtol=1e-9
        )

    def test_bare_resonator_reports_null_gain(self, capsys, tmp_path):
        config = write_config(tmp_path, BARE_CONFIG)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["simulate", "--config", config, "--out", str(out), "--no-plot"]
        )
        assert code == 0
        summary = json.loads(stdout)
        # critically coupled bare resonator: r(omega_r) = 0 exactly, so the
        # center gain in dB has no value and the bandwidth figures are moot
        assert summary["center_gain_db"] is None
        assert summary["fwhm_hz"] is None
        assert summary["gbp_hz"] is None
        assert summary["kappa_s_hz"] == 0.0
        rows = np.genfromtxt(out / "spectra.csv", delimiter=",", names=True)
        assert np.all(rows["r_s"] == 0.0)
        np.testing.assert_allclose(
            rows["r_in"] + rows["r_i"], np.ones(rows.size), rtol=1e-12
        )

    def test_cool_critical_coupling_absorbs_on_resonance(self, capsys, tmp_path):
        config = write_config(tmp_path, COOL_CRITICAL_CONFIG)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["simulate", "--config", config, "--out", str(out), "--no-plot"]
        )
        assert code == 0
        assert json.loads(stdout)["branch"] == "cool"
        rows = np.genfromtxt(out / "spectra.csv", delimiter=",", names=True)
        center = rows.size // 2
        assert rows["omega_hz"][center] == pytest.approx(OMEGA_R_HZ, rel=1e-12)
        assert rows["r_in"][center] == pytest.approx(0.0, abs=1e-24)
        np.testing.assert_allclose(
            rows["r_in"] + rows["r_s"] + rows["r_i"], np.ones(rows.size), rtol=1e-9
        )

    def test_branch_flag_overrides_config(self, capsys, tmp_path):
        config = write_config(tmp_path, AMPLIFY_CONFIG)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys,
            ["simulate", "--config", config, "--out", str(out), "--no-plot",
             "--branch", "cool"],
        )
        assert code == 0
        assert json.loads(stdout)["branch"] == "cool"

    def test_rerun_is_byte_identical(self, capsys, tmp_path):
        config = write_config(tmp_path, AMPLIFY_CONFIG)
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            code, _, _ = run_cli(
                capsys,
                ["simulate", "--config", config, "--out", str(out), "--no-plot"],
            )
            assert code == 0
        assert read_bytes(first / "spectra.csv") == read_bytes(second / "spectra.csv")
        assert read_bytes(first / "summary.json") == read_bytes(second / "summary.json")

    def test_stdout_echoes_summary_file(self, capsys, tmp_path):
        config = write_config(tmp_path, AMPLIFY_CONFIG)
        out = tmp_path / "out"
        _, stdout, _ = run_cli(
            capsys, ["simulate", "--config", config, "--out", str(out), "--no-plot"]
        )
        assert stdout == (out / "summary.json").read_text(encoding="utf-8")

    def test_plot_rendered_by_default(self, capsys, tmp_path):
        config = write_config(tmp_path, AMPLIFY_CONFIG)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["simulate", "--config", config, "--out", str(out)]
        )
        assert code == 0
        assert json.loads(stdout)["figure_png"] == "spectra.png"
        assert (out / "spectra.png").stat().st_size > 0

    def test_at_threshold_exits_3_and_names_kappa_s(self, capsys, tmp_path):
        # 4 g^2 / fwhm lands exactly on kappa_e + kappa_i
        config = write_config(
            tmp_path,
            AMPLIFY_CONFIG.replace(
                "g_ens_hz = 1.0e6", "g_ens_hz = 1.4142135623730951e6"
            ),
        )
        code, _, stderr = run_cli(
            capsys,
            ["simulate", "--config", config, "--out", str(tmp_path / "o"), "--no-plot"],
        )
        assert code == 3
        assert "kappa_s" in stderr

    def test_unknown_config_key_exits_2(self, capsys, tmp_path):
        config = write_config(
            tmp_path, AMPLIFY_CONFIG + "\n[typo_section]\nvalue = 1\n"
        )
        code, _, stderr = run_cli(
            capsys,
            ["simulate", "--config", config, "--out", str(tmp_path / "o"), "--no-plot"],
        )
        assert code == 2
        assert "error:" in stderr

    def test_malformed_toml_exits_2(self, capsys, tmp_path):
        config = write_config(tmp_path, "[resonator\nomega_r_hz = 9.8e9\n")
        code, _, _ = run_cli(
            capsys,
            ["simulate", "--config", config, "--out", str(tmp_path / "o"), "--no-plot"],
        )
        assert code == 2


class TestFitCommand:
    def test_reflection_roundtrip(self, capsys, tmp_path):
        trace = tmp_path / "refl.csv"
        write_reflection_fixture(trace)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["fit", "reflection", str(trace), "--out", str(out), "--no-plot"]
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["converged"] is True
        params = result["params"]
        assert params["kappa_e_hz"] == pytest.approx(0.95e6, rel=1e-6)
        assert params["kappa_i_hz"] == pytest.approx(0.891e6, rel=1e-6)
        assert params["omega_r_hz"] == pytest.approx(OMEGA_R_HZ, rel=1e-12)
        assert params["amp_scale"] == pytest.approx(0.83, rel=1e-6)
        assert params["electrical_delay_s"] == pytest.approx(38e-9, rel=1e-6)
        assert set(result["sigmas"]) == set(params)

    def test_gain_roundtrip_reports_threshold(self, capsys, tmp_path):
        trace = tmp_path / "gain.csv"
        write_gain_fixture(trace)
        config = write_config(tmp_path, GAIN_FIT_CONFIG)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys,
            ["fit", "gain", str(trace), "--config", config, "--out", str(out),
             "--no-plot"],
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["params"]["g_ens_hz"] == pytest.approx(GAIN_G_ENS_HZ, rel=1e-6)
        assert result["g_threshold_hz"] == pytest.approx(1.6535e6, rel=1e-4)
        assert result["kappa_s_hz"] == pytest.approx(
            4.0 * GAIN_G_ENS_HZ**2 / 2.236e6, rel=1e-6
        )

    def test_gain_without_config_exits_2(self, capsys, tmp_path):
        trace = tmp_path / "gain.csv"
        write_gain_fixture(trace)
        code, _, stderr = run_cli(
            capsys, ["fit", "gain", str(trace), "--out", str(tmp_path / "o")]
        )
        assert code == 2
        assert "--config" in stderr

    def test_line_roundtrip_converts_field_axis(self, capsys, tmp_path):
        trace = tmp_path / "line.csv"
        write_line_fixture(trace)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys,
            ["fit", "line", str(trace), "--model", "gaussian", "--out", str(out),
             "--no-plot"],
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["axis_conversion_hz_per_t"] == pytest.approx(28.0e9, rel=1e-12)
        params = result["params"]
        assert params["sigma_t"] == pytest.approx(LINE_SIGMA_T, rel=1e-6)
        assert params["sigma_hz"] == pytest.approx(28.0e9 * LINE_SIGMA_T, rel=1e-6)
        assert params["center_hz"] == pytest.approx(0.3e6, rel=1e-6)

    def test_decay_roundtrip(self, capsys, tmp_path):
        trace = tmp_path / "decay.csv"
        write_decay_fixture(trace)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["fit", "decay", str(trace), "--out", str(out), "--no-plot"]
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["params"]["tau_s"] == pytest.approx(DECAY_TAU, rel=1e-8)
        assert result["params"]["offset"] == pytest.approx(0.05, rel=1e-6)

    def test_decay_rerun_is_byte_identical(self, capsys, tmp_path):
        trace = tmp_path / "decay.csv"
        write_decay_fixture(trace)
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            code, _, _ = run_cli(
                capsys, ["fit", "decay", str(trace), "--out", str(out), "--no-plot"]
            )
            assert code == 0
        assert read_bytes(first / "fit_decay.json") == read_bytes(
            second / "fit_decay.json"
        )

    def test_fit_figure_rendered_by_default(self, capsys, tmp_path):
        trace = tmp_path / "decay.csv"
        write_decay_fixture(trace)
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["fit", "decay", str(trace), "--out", str(out)]
        )
        assert code == 0
        assert json.loads(stdout)["figure_png"] == "fit_decay.png"
        assert (out / "fit_decay.png").stat().st_size > 0

    def test_wrong_header_exits_2(self, capsys, tmp_path):
        trace = tmp_path / "bad.csv"
        io.write_csv(str(trace), ["frequency", "re", "im"],
                     [np.arange(9.0), np.ones(9), np.zeros(9)])
        code, _, stderr = run_cli(
            capsys, ["fit", "reflection", str(trace), "--out", str(tmp_path / "o")]
        )
        assert code == 2
        assert "expected columns" in stderr

    def test_featureless_trace_exits_4(self, capsys, tmp_path):
        trace = tmp_path / "flat.csv"
        io.write_csv(str(trace), ["freq_hz", "re", "im"],
                     [np.linspace(9.79e9, 9.81e9, 101), -np.ones(101), np.zeros(101)])
        code, _, stderr = run_cli(
            capsys, ["fit", "reflection", str(trace), "--out", str(tmp_path / "o")]
        )
        assert code == 4
        assert "error:" in stderr


class TestExtractCommand:
    def test_maser_example(self, capsys, tmp_path):
        config = write_config(tmp_path, MASER_CHAIN_CONFIG, "chain.toml")
        measurement = tmp_path / "measurement.json"
        io.write_json(str(measurement), {"noise_ratio": 12.195, "maser_gain_db": 10.0})
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys,
            ["extract", "maser", str(measurement), "--config", config,
             "--out", str(out)],
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["mode"] == "exact"
        assert result["t_k"] == pytest.approx(231.0, abs=1.0)
        assert result["t_low_k"] < result["t_k"] < result["t_high_k"]
        assert result["n_low"] < result["n"] < result["n_high"]
        assert result["beta_low"] == pytest.approx(0.89 * 10 ** (-0.01), rel=1e-12)
        assert result["beta_high"] == pytest.approx(0.89 * 10 ** (0.01), rel=1e-12)
        assert load_result(out, "extract_maser.json") == result

    def test_cooler_example(self, capsys, tmp_path):
        config = write_config(tmp_path, COOLER_CHAIN_CONFIG, "chain.toml")
        measurement = tmp_path / "measurement.json"
        # a 3.925 dB on/off reduction of the receiver noise floor
        io.write_json(str(measurement), {"noise_ratio_db": -3.925449767853314})
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys,
            ["extract", "cooler", str(measurement), "--config", config,
             "--out", str(out)],
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["t_k"] == pytest.approx(66.06, abs=0.1)
        assert result["t_low_k"] < result["t_k"] < result["t_high_k"]

    def test_paper_approx_mode_shifts_estimate(self, capsys, tmp_path):
        config = write_config(tmp_path, MASER_CHAIN_CONFIG, "chain.toml")
        measurement = tmp_path / "measurement.json"
        io.write_json(str(measurement), {"noise_ratio": 12.195, "maser_gain_db": 10.0})
        exact_code, exact_out, _ = run_cli(
            capsys,
            ["extract", "maser", str(measurement), "--config", config,
             "--out", str(tmp_path / "a")],
        )
        approx_code, approx_out, _ = run_cli(
            capsys,
            ["extract", "maser", str(measurement), "--config", config,
             "--out", str(tmp_path / "b"), "--compat-paper-approx"],
        )
        assert exact_code == 0 and approx_code == 0
        exact, approx = json.loads(exact_out), json.loads(approx_out)
        assert approx["mode"] == "paper_approx"
        assert approx["t_k"] != exact["t_k"]
        assert approx["t_k"] == pytest.approx(exact["t_k"], rel=0.02)

    def test_cooler_rejects_maser_gain_key(self, capsys, tmp_path):
        config = write_config(tmp_path, COOLER_CHAIN_CONFIG, "chain.toml")
        measurement = tmp_path / "measurement.json"
        io.write_json(str(measurement), {"noise_ratio": 0.405, "maser_gain_db": 10.0})
        code, _, _ = run_cli(
            capsys,
            ["extract", "cooler", str(measurement), "--config", config,
             "--out", str(tmp_path / "o")],
        )
        assert code == 2

    def test_unknown_chain_key_exits_2(self, capsys, tmp_path):
        config = write_config(
            tmp_path, MASER_CHAIN_CONFIG + "bogus = 1\n", "chain.toml"
        )
        measurement = tmp_path / "measurement.json"
        io.write_json(str(measurement), {"noise_ratio": 12.195, "maser_gain_db": 10.0})
        code, _, stderr = run_cli(
            capsys,
            ["extract", "maser", str(measurement), "--config", config,
             "--out", str(tmp_path / "o")],
        )
        assert code == 2
        assert "bogus" in stderr


class TestSpinTempCommand:
    def test_inverted_example(self, capsys, tmp_path):
        code, stdout, _ = run_cli(
            capsys,
            ["spin-temp", "--chi", "-620", "--t0-k", "294",
             "--omega-s-hz", "9.8e9", "--out", str(tmp_path)],
        )
        assert code == 0
        result = json.loads(stdout)
        assert result["rho"] == pytest.approx(-0.496, abs=0.005)
        assert result["t_s_k"] == pytest.approx(-0.433, abs=0.005)
        assert result["inverted"] is True
        assert result["abs_t_s_k"] < 0.5

    def test_overunity_polarization_exits_5(self, capsys, tmp_path):
        code, _, stderr = run_cli(
            capsys,
            ["spin-temp", "--chi", "-1300", "--t0-k", "294",
             "--omega-s-hz", "9.8e9", "--out", str(tmp_path)],
        )
        assert code == 5
        assert "error:" in stderr


class TestCouplingCommand:
    def test_uniform_transverse_map(self, capsys, tmp_path):
        fieldmap = tmp_path / "fieldmap.csv"
        write_fieldmap(fieldmap)
        config = write_config(tmp_path, DRIVE_CONFIG, "drive.toml")
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, ["coupling", str(fieldmap), "--config", config, "--out", str(out)]
        )
        assert code == 0
        result = json.loads(stdout)
        # half the cells sit in the sample and the field is uniform
        assert result["eta"] == pytest.approx(0.5, rel=1e-12)
        assert result["v_m_m3"] == pytest.approx(8e-9, rel=1e-12)
        assert result["b1_sample_mean_t"] == pytest.approx(1e-9, rel=1e-12)
        assert result["g0_hz"] > 0.0
        assert result["n_bar"] > 0.0

    def test_field_scale_moves_g0_only(self, capsys, tmp_path):
        base, scaled = tmp_path / "base.csv", tmp_path / "scaled.csv"
        write_fieldmap(base, b1y_t=1e-9)
        write_fieldmap(scaled, b1y_t=1e-8)
        config = write_config(tmp_path, DRIVE_CONFIG, "drive.toml")
        _, out_base, _ = run_cli(
            capsys, ["coupling", str(base), "--config", config,
                     "--out", str(tmp_path / "a")]
        )
        _, out_scaled, _ = run_cli(
            capsys, ["coupling", str(scaled), "--config", config,
                     "--out", str(tmp_path / "b")]
        )
        first, second = json.loads(out_base), json.loads(out_scaled)
        assert second["g0_hz"] == pytest.approx(10.0 * first["g0_hz"], rel=1e-12)
        assert second["eta"] == first["eta"]
        assert second["v_m_m3"] == first["v_m_m3"]
        assert second["n_bar"] == first["n_bar"]

    def test_zero_drive_power_exits_2(self, capsys, tmp_path):
        fieldmap = tmp_path / "fieldmap.csv"
        write_fieldmap(fieldmap)
        config = write_config(
            tmp_path, DRIVE_CONFIG.replace("power_dbm = -80.0", "power_w = 0.0"),
            "drive.toml",
        )
        code, _, stderr = run_cli(
            capsys,
            ["coupling", str(fieldmap), "--config", config, "--out", str(tmp_path / "o")],
        )
        assert code == 2
        assert "error:" in stderr


class TestSampleEnsembleCommand:
    def test_same_seed_is_byte_identical(self, capsys, tmp_path):
        config = write_config(tmp_path, ENSEMBLE_CONFIG, "ensemble.toml")
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            code, _, _ = run_cli(
                capsys,
                ["sample-ensemble", "--config", config, "--n", "500",
                 "--seed", "7", "--out", str(out)],
            )
            assert code == 0
        assert read_bytes(first / "ensemble.csv") == read_bytes(second / "ensemble.csv")

    def test_seed_changes_draw_but_not_coupling(self, capsys, tmp_path):
        config = write_config(tmp_path, ENSEMBLE_CONFIG, "ensemble.toml")
        _, out_a, _ = run_cli(
            capsys,
            ["sample-ensemble", "--config", config, "--n", "500",
             "--seed", "1", "--out", str(tmp_path / "a")],
        )
        _, out_b, _ = run_cli(
            capsys,
            ["sample-ensemble", "--config", config, "--n", "500",
             "--seed", "2", "--out", str(tmp_path / "b")],
        )
        assert read_bytes(tmp_path / "a" / "ensemble.csv") != read_bytes(
            tmp_path / "b" / "ensemble.csv"
        )
        # the collective coupling is preserved by construction
        assert json.loads(out_a)["g_ens_hz"] == pytest.approx(1.54e6, rel=1e-12)
        assert json.loads(out_b)["g_ens_hz"] == pytest.approx(1.54e6, rel=1e-12)

    def test_sampled_csv_loads_as_discrete_profile(self, capsys, tmp_path):
        config = write_config(tmp_path, ENSEMBLE_CONFIG, "ensemble.toml")
        out = tmp_path / "out"
        code, _, _ = run_cli(
            capsys,
            ["sample-ensemble", "--config", config, "--n", "64",
             "--seed", "3", "--out", str(out)],
        )
        assert code == 0
        spins = io.read_discrete_spins(str(out / "ensemble.csv"))
        assert spins.omega.size == 64
        assert np.all(spins.g > 0.0)


class TestUsage:
    def test_unknown_fit_kind_exits_2(self, capsys):
        code, _, stderr = run_cli(capsys, ["fit", "nonsense", "x.csv"])
        assert code == 2
        assert "invalid choice" in stderr

    def test_missing_subcommand_exits_2(self, capsys):
        code, _, _ = run_cli(capsys, [])
        assert code == 2

    def test_missing_input_file_exits_2(self, capsys, tmp_path):
        code, _, stderr = run_cli(
            capsys,
            ["fit", "decay", str(tmp_path / "absent.csv"), "--out", str(tmp_path)],
        )
        assert code == 2
        assert "error:" in stderr
