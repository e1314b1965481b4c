"""Command-line entry point.

Subcommands: ``simulate`` (sweep reflection/gain/noise over a frequency
grid), ``fit`` (reflection / gain / lineshape / decay traces),
``extract`` (receiver-chain maser and cooler temperatures),
``spin-temp`` (echo enhancement to spin temperature), ``coupling``
(field-map coupling pipeline), and ``sample-ensemble`` (draw a discrete
ensemble from a continuous profile).

Results are written under ``--out`` as CSV/JSON (byte-stable formatting)
plus rendered PNG figures, and the JSON payload is echoed to stdout.
Exit codes: 0 ok, 2 config/schema, 3 oscillation threshold, 4
non-convergence, 5 inconsistent measurement.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional

import numpy as np

from . import io, plots
from .chain import MeasurementKind, extract_with_uncertainty
from .coupling import FieldMap, coupling_pipeline, sample_mean_transverse_field
from .errors import ConfigError, SpinMaserError
from .fitting import (
    LineshapeModel,
    exp_decay_model,
    fit_exp_decay,
    fit_gain_curve,
    fit_lineshape,
    fit_reflection,
    gaussian_peak,
    reflection_trace_model,
    triple_lorentzian,
)
from .quantities import GAMMA_E, angular_to_hz, angular_to_tesla, hz_to_angular
from .response import (
    Branch,
    bandwidth_and_gbp,
    gain_spectrum,
    noise_coefficients,
    output_noise,
    reflection,
    threshold_margin,
)
from .spins import SpinEnsemble, effective_linewidth, emission_rate, sample_discrete
from .thermo import spin_state_from_echo_enhancement

__all__ = ["main"]


def _emit(out_dir: str, filename: str, payload: dict) -> None:
    text = io.write_json(os.path.join(out_dir, filename), payload)
    print(text)


def _branch_name(branch: Branch) -> str:
    return "amplify" if branch is Branch.AMPLIFY else "cool"


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def _mode_from_config(config: dict, override: Optional[str]) -> Branch:
    table = dict(config.get("mode", {}))
    name = table.pop("branch", "amplify")
    if table:
        raise ConfigError(f"unknown keys in [mode]: {', '.join(sorted(table))}")
    if override is not None:
        name = override
    return io.branch_from_name(name)


def _cmd_simulate(args) -> None:
    config = io.load_toml(args.config)
    io.require_only_sections(config, ["resonator", "ensemble", "baths", "sweep", "mode"])
    base_dir = os.path.dirname(os.path.abspath(args.config))
    res = io.resonator_from_config(config)
    ens = io.ensemble_from_config(config, base_dir, default_omega_s=res.omega_r)
    occ = io.occupations_from_config(config, res.omega_r)
    grid = io.sweep_from_config(config)
    branch = _mode_from_config(config, args.branch)

    refl = reflection(res, ens, branch, grid)
    gain_db = gain_spectrum(res, ens, branch, grid)[:, 1]
    coeffs = noise_coefficients(res, ens, branch, grid)
    n_out = output_noise(res, ens, branch, occ, grid)
    omega_hz = grid / hz_to_angular(1.0)

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "spectra.csv")
    io.write_csv(
        csv_path,
        ["omega_hz", "re", "im", "gain_db", "r_in", "r_s", "r_i", "n_out"],
        [omega_hz, refl.real, refl.imag, gain_db,
         coeffs.r_in, coeffs.r_s, coeffs.r_i, n_out],
    )

    center_reflection = reflection(res, ens, branch, res.omega_r)
    center_gain = abs(center_reflection) ** 2
    center_gain_db = 10.0 * math.log10(center_gain) if center_gain > 0.0 else None
    fwhm_hz = gbp_hz = None
    if branch is Branch.AMPLIFY and center_gain > 1.0:
        fwhm_hz, gbp_hz = bandwidth_and_gbp(
            np.column_stack([grid, gain_db])
        )

    figure_name = None
    if not args.no_plot:
        figure_name = "spectra.png"
        plots.save_spectra_figure(
            os.path.join(args.out, figure_name),
            omega_hz, gain_db, coeffs.r_in, coeffs.r_s, coeffs.r_i, n_out,
            title=f"{_branch_name(branch)} sweep",
        )

    summary = {
        "branch": _branch_name(branch),
        "omega_r_hz": angular_to_hz(res.omega_r),
        "kappa_e_hz": angular_to_hz(res.kappa_e),
        "kappa_i_hz": angular_to_hz(res.kappa_i),
        "kappa_s_hz": angular_to_hz(emission_rate(ens)),
        "threshold_margin": threshold_margin(res, ens),
        "center_gain_db": center_gain_db,
        "fwhm_hz": fwhm_hz,
        "gbp_hz": gbp_hz,
        "sweep_start_hz": float(omega_hz[0]),
        "sweep_stop_hz": float(omega_hz[-1]),
        "sweep_points": int(omega_hz.size),
        "spectra_csv": "spectra.csv",
        "figure_png": figure_name,
    }
    _emit(args.out, "summary.json", summary)


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------


def _converted(result, conversions: dict) -> "tuple[dict, dict]":
    """Map fit parameters/uncertainties through linear unit conversions.

    ``conversions`` maps output key -> (input key, scale factor).
    """
    params, sigmas = {}, {}
    for out_key, (in_key, scale) in conversions.items():
        params[out_key] = result.params[in_key] * scale
        sigmas[out_key] = result.sigmas[in_key] * abs(scale)
    return params, sigmas


def _fit_payload(kind: str, result, params: dict, sigmas: dict, extra: dict) -> dict:
    payload = {
        "kind": kind,
        "converged": result.converged,
        "iterations": result.iterations,
        "residual_norm": result.residual_norm,
        "params": params,
        "sigmas": sigmas,
    }
    payload.update(extra)
    return payload


def _cmd_fit(args) -> None:
    os.makedirs(args.out, exist_ok=True)
    per_hz = 1.0 / hz_to_angular(1.0)

    if args.kind == "reflection":
        trace = io.read_reflection_trace(args.input)
        result = fit_reflection(trace)
        params, sigmas = _converted(result, {
            "kappa_e_hz": ("kappa_e", per_hz),
            "kappa_i_hz": ("kappa_i", per_hz),
            "omega_r_hz": ("omega_r", per_hz),
            "amp_scale": ("amp_scale", 1.0),
            "phase_offset_rad": ("phase_offset", 1.0),
            "electrical_delay_s": ("electrical_delay", 1.0),
        })
        payload = _fit_payload("reflection", result, params, sigmas, {})
        if not args.no_plot:
            model = reflection_trace_model(
                trace.x, result.params["kappa_e"], result.params["kappa_i"],
                result.params["omega_r"], result.params["amp_scale"],
                result.params["phase_offset"], result.params["electrical_delay"],
            )
            plots.save_trace_fit_figure(
                os.path.join(args.out, "fit_reflection.png"),
                trace.x * per_hz / 1e9, np.abs(trace.values), np.abs(model),
                "frequency (GHz)", "|r|", "reflection fit",
            )
            payload["figure_png"] = "fit_reflection.png"
        _emit(args.out, "fit_reflection.json", payload)
        return

    if args.kind == "gain":
        if args.config is None:
            raise ConfigError(
                "fit gain needs --config with [resonator] and [ensemble]"
            )
        config = io.load_toml(args.config)
        io.require_only_sections(config, ["resonator", "ensemble"])
        base_dir = os.path.dirname(os.path.abspath(args.config))
        res = io.resonator_from_config(config)
        shape = io.ensemble_from_config(
            config, base_dir, default_omega_s=res.omega_r, require_coupling=False
        )
        trace = io.read_gain_trace(args.input)
        result = fit_gain_curve(trace, res, shape.profile, shape.gamma)
        params, sigmas = _converted(result, {"g_ens_hz": ("g_ens", per_hz)})
        fitted = SpinEnsemble(
            profile=shape.profile, gamma=shape.gamma, g_ens=result.params["g_ens"]
        )
        gamma_eff = effective_linewidth(fitted)
        extra = {
            "kappa_s_hz": angular_to_hz(emission_rate(fitted)),
            "g_threshold_hz": angular_to_hz(
                math.sqrt(res.kappa_total * gamma_eff / 4.0)
            ),
        }
        payload = _fit_payload("gain", result, params, sigmas, extra)
        if not args.no_plot:
            model = gain_spectrum(res, fitted, Branch.AMPLIFY, trace.x)[:, 1]
            plots.save_trace_fit_figure(
                os.path.join(args.out, "fit_gain.png"),
                trace.x * per_hz / 1e9, trace.values, model,
                "frequency (GHz)", "gain (dB)", "gain-curve fit",
            )
            payload["figure_png"] = "fit_gain.png"
        _emit(args.out, "fit_gain.json", payload)
        return

    if args.kind == "line":
        trace = io.read_field_spectrum_trace(args.input)
        model_kind = (
            LineshapeModel.GAUSSIAN
            if args.model == "gaussian"
            else LineshapeModel.TRIPLE_LORENTZIAN
        )
        result = fit_lineshape(trace, model_kind)
        per_tesla = 1.0 / GAMMA_E
        if model_kind is LineshapeModel.GAUSSIAN:
            conversions = {
                "center_hz": ("center", per_hz),
                "center_t": ("center", per_tesla),
                "sigma_hz": ("sigma", per_hz),
                "sigma_t": ("sigma", per_tesla),
                "amplitude": ("amplitude", 1.0),
                "baseline": ("baseline", 1.0),
            }
            model = gaussian_peak(
                trace.x, result.params["center"], result.params["sigma"],
                result.params["amplitude"], result.params["baseline"],
            )
        else:
            conversions = {"center_hz": ("center", per_hz),
                           "center_t": ("center", per_tesla),
                           "splitting_hz": ("splitting", per_hz),
                           "splitting_t": ("splitting", per_tesla)}
            for key in ("fwhm_m1", "fwhm_0", "fwhm_p1"):
                conversions[f"{key}_hz"] = (key, per_hz)
                conversions[f"{key}_t"] = (key, per_tesla)
            for key in ("amp_m1", "amp_0", "amp_p1", "baseline"):
                conversions[key] = (key, 1.0)
            model = triple_lorentzian(
                trace.x,
                *(result.params[k] for k in
                  ("center", "splitting", "fwhm_m1", "fwhm_0", "fwhm_p1",
                   "amp_m1", "amp_0", "amp_p1", "baseline")),
            )
        params, sigmas = _converted(result, conversions)
        extra = {
            "model": model_kind.value,
            "axis_conversion_hz_per_t": angular_to_hz(GAMMA_E),
        }
        payload = _fit_payload("line", result, params, sigmas, extra)
        if not args.no_plot:
            field_ut = angular_to_tesla(1.0) * trace.x * 1e6
            plots.save_trace_fit_figure(
                os.path.join(args.out, "fit_line.png"),
                field_ut, trace.values, model,
                "field (uT)", "signal", f"{model_kind.value} lineshape fit",
            )
            payload["figure_png"] = "fit_line.png"
        _emit(args.out, "fit_line.json", payload)
        return

    trace = io.read_decay_trace(args.input)
    result = fit_exp_decay(trace)
    params, sigmas = _converted(result, {
        "tau_s": ("tau", 1.0),
        "amplitude": ("amplitude", 1.0),
        "offset": ("offset", 1.0),
    })
    payload = _fit_payload("decay", result, params, sigmas, {})
    if not args.no_plot:
        model = exp_decay_model(
            trace.x, result.params["tau"], result.params["amplitude"],
            result.params["offset"],
        )
        plots.save_trace_fit_figure(
            os.path.join(args.out, "fit_decay.png"),
            trace.x * 1e3, trace.values, model,
            "time (ms)", "signal", "exponential-decay fit",
        )
        payload["figure_png"] = "fit_decay.png"
    _emit(args.out, "fit_decay.json", payload)


# --------------------------------------------------------------------------
# extract / spin-temp / coupling / sample-ensemble
# --------------------------------------------------------------------------


def _cmd_extract(args) -> None:
    kind = (
        MeasurementKind.MASER_ON_OFF
        if args.kind == "maser"
        else MeasurementKind.COOLER_ON_OFF
    )
    chain_config = io.load_toml(args.config)
    io.require_only_sections(chain_config, ["chain"])
    chain = io.chain_from_config(chain_config)
    measurement = io.read_measurement_json(args.measurement, kind)
    interval = extract_with_uncertainty(
        measurement, chain, large_gain_approx=args.compat_paper_approx
    )
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "kind": args.kind,
        "mode": "paper_approx" if args.compat_paper_approx else "exact",
        "n": interval.n,
        "t_k": interval.t,
        "n_low": interval.n_low,
        "n_high": interval.n_high,
        "t_low_k": interval.t_low,
        "t_high_k": interval.t_high,
        "beta_low": interval.beta_low,
        "beta_high": interval.beta_high,
    }
    _emit(args.out, f"extract_{args.kind}.json", payload)


def _cmd_spin_temp(args) -> None:
    state = spin_state_from_echo_enhancement(
        args.chi, args.t0_k, hz_to_angular(args.omega_s_hz)
    )
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "chi": args.chi,
        "t0_k": args.t0_k,
        "omega_s_hz": args.omega_s_hz,
        "rho": state.rho,
        "t_s_k": state.t_s,
        "inverted": state.inverted,
        "abs_rho": abs(state.rho),
        "abs_t_s_k": abs(state.t_s),
    }
    _emit(args.out, "spin_temp.json", payload)


def _cmd_coupling(args) -> None:
    drive_config = io.load_toml(args.config)
    io.require_only_sections(drive_config, ["drive"])
    drive = io.drive_from_config(drive_config)
    columns = io.read_fieldmap_columns(args.fieldmap)
    fmap = FieldMap(
        volume=columns["volume_m3"],
        b1x=columns["b1x_t"],
        b1y=columns["b1y_t"],
        b1z=columns["b1z_t"],
        in_sample=columns["in_sample"],
        **drive,
    )
    result = coupling_pipeline(fmap)
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "g0_hz": angular_to_hz(result.g0),
        "n_bar": result.n_bar,
        "eta": result.eta,
        "v_m_m3": result.v_m,
        "b1_sample_mean_t": sample_mean_transverse_field(fmap),
    }
    _emit(args.out, "coupling.json", payload)


def _cmd_sample_ensemble(args) -> None:
    config = io.load_toml(args.config)
    io.require_only_sections(config, ["ensemble"])
    base_dir = os.path.dirname(os.path.abspath(args.config))
    ens = io.ensemble_from_config(config, base_dir)
    sampled = sample_discrete(ens, args.n, args.seed)
    os.makedirs(args.out, exist_ok=True)
    per_hz = 1.0 / hz_to_angular(1.0)
    io.write_csv(
        os.path.join(args.out, "ensemble.csv"),
        ["omega_hz", "g_hz"],
        [sampled.profile.omega * per_hz, sampled.profile.g * per_hz],
    )
    payload = {
        "n_spins": args.n,
        "seed": args.seed,
        "g_ens_hz": angular_to_hz(sampled.g_ens),
        "gamma_hz": angular_to_hz(sampled.gamma),
        "ensemble_csv": "ensemble.csv",
    }
    _emit(args.out, "sample_ensemble.json", payload)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinmaser",
        description="Spin-ensemble maser amplifier / microwave cooler toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sweep reflection, gain, and noise")
    sim.add_argument("--config", required=True, help="TOML run config")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--branch", choices=["amplify", "cool"],
                     help="override the config branch")
    sim.add_argument("--no-plot", action="store_true",
                     help="skip PNG rendering")
    sim.set_defaults(handler=_cmd_simulate)

    fit = sub.add_parser("fit", help="fit a measured trace")
    fit.add_argument("kind", choices=["reflection", "gain", "line", "decay"])
    fit.add_argument("input", help="trace CSV")
    fit.add_argument("--config", help="TOML config (required for gain fits)")
    fit.add_argument("--model", choices=["gaussian", "triple"],
                     default="gaussian", help="lineshape model for `fit line`")
    fit.add_argument("--out", default=".")
    fit.add_argument("--no-plot", action="store_true")
    fit.set_defaults(handler=_cmd_fit)

    ext = sub.add_parser("extract", help="receiver-chain noise extraction")
    ext.add_argument("kind", choices=["maser", "cooler"])
    ext.add_argument("measurement", help="measurement JSON")
    ext.add_argument("--config", required=True, help="TOML with [chain]")
    ext.add_argument("--out", default=".")
    ext.add_argument("--compat-paper-approx", action="store_true",
                     help="use the large-gain approximation of the chain")
    ext.set_defaults(handler=_cmd_extract)

    st = sub.add_parser("spin-temp", help="echo enhancement to spin temperature")
    st.add_argument("--chi", type=float, required=True)
    st.add_argument("--t0-k", type=float, required=True, dest="t0_k")
    st.add_argument("--omega-s-hz", type=float, required=True, dest="omega_s_hz")
    st.add_argument("--out", default=".")
    st.set_defaults(handler=_cmd_spin_temp)

    cpl = sub.add_parser("coupling", help="field-map coupling pipeline")
    cpl.add_argument("fieldmap", help="field-map CSV")
    cpl.add_argument("--config", required=True, help="TOML with [drive]")
    cpl.add_argument("--out", default=".")
    cpl.set_defaults(handler=_cmd_coupling)

    smp = sub.add_parser("sample-ensemble",
                         help="draw discrete spins from a profile")
    smp.add_argument("--config", required=True, help="TOML with [ensemble]")
    smp.add_argument("--n", type=int, required=True, help="number of spins")
    smp.add_argument("--seed", type=int, default=1)
    smp.add_argument("--out", default=".")
    smp.set_defaults(handler=_cmd_sample_ensemble)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    try:
        args.handler(args)
    except SpinMaserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
