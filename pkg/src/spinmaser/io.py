"""Config, trace-file, and result I/O with byte-stable formatting.

Configs are TOML with explicit unit suffixes: frequencies in Hz (``*_hz``),
temperatures in kelvin (``*_k``), powers in watts (``*_w``) or dBm
(``*_dbm``), magnetic fields in tesla (``*_t``).  Unknown keys are
rejected so a typo cannot silently fall back to a default.

Delimited files carry a fixed header per schema; floats are written in
shortest-round-trip form so repeated runs are byte-identical.  All writes
go through a temp file in the target directory followed by an atomic
rename.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import tempfile
from typing import Dict, List, Sequence

import numpy as np

if sys.version_info >= (3, 11):  # pragma: no cover - version shim
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from .chain import ChainParams, MeasurementKind, NoiseMeasurement
from .errors import ConfigError, SchemaError, ValidationError
from .fitting import ComplexTrace, TraceKind
from .quantities import (
    dbm_to_watt,
    hz_to_angular,
    tesla_to_angular,
)
from .response import Branch, ResonatorParams
from .spins import (
    DiscreteSpins,
    GaussianProfile,
    LorentzianProfile,
    SpinEnsemble,
    TabulatedProfile,
    TripleLorentzianProfile,
)
from .thermo import bose_occupation

__all__ = [
    "format_float",
    "atomic_write_text",
    "write_csv",
    "read_columns",
    "read_reflection_trace",
    "read_gain_trace",
    "read_field_spectrum_trace",
    "read_decay_trace",
    "read_fieldmap_columns",
    "read_tabulated_profile",
    "read_discrete_spins",
    "dumps_json",
    "write_json",
    "load_toml",
    "require_only_sections",
    "read_measurement_json",
    "resonator_from_config",
    "ensemble_from_config",
    "occupations_from_config",
    "chain_from_config",
    "sweep_from_config",
    "branch_from_name",
    "drive_from_config",
]

REFLECTION_HEADER = ["freq_hz", "re", "im"]
GAIN_HEADER = ["freq_hz", "gain_db"]
SPECTRUM_HEADER = ["b0_t", "signal"]
DECAY_HEADER = ["time_s", "signal"]
FIELDMAP_HEADER = [
    "x_m", "y_m", "z_m", "volume_m3", "b1x_t", "b1y_t", "b1z_t", "in_sample",
]
TABULATED_HEADER = ["omega_hz", "f_per_hz"]
DISCRETE_HEADER = ["omega_hz", "g_hz"]


# --------------------------------------------------------------------------
# low-level formatting and file plumbing
# --------------------------------------------------------------------------


def format_float(value: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    value = float(value)
    if not np.isfinite(value):
        raise ValidationError(f"cannot serialize non-finite value {value!r}")
    return repr(value)


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path: str, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write parallel columns under a fixed header, one row per sample."""
    arrays = [np.asarray(col) for col in columns]
    if len(arrays) != len(header) or any(a.shape != arrays[0].shape for a in arrays):
        raise ValidationError("csv columns must match the header and each other")
    lines = [",".join(header)]
    for row in zip(*arrays):
        lines.append(",".join(format_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_columns(path: str, header: Sequence[str]) -> List[np.ndarray]:
    """Read a delimited file, insisting on the exact expected header."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows:
        raise SchemaError(f"{path}: empty file, expected header {','.join(header)}")
    got = [cell.strip() for cell in rows[0]]
    if got != list(header):
        raise SchemaError(
            f"{path}: expected columns {','.join(header)}, got {','.join(got)}"
        )
    if len(rows) < 2:
        raise SchemaError(f"{path}: no data rows under {','.join(header)}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            data.append([float(cell) for cell in row])
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    matrix = np.asarray(data, dtype=float)
    return [matrix[:, k] for k in range(len(header))]


# --------------------------------------------------------------------------
# trace readers
# --------------------------------------------------------------------------


def read_reflection_trace(path: str) -> ComplexTrace:
    freq, re, im = read_columns(path, REFLECTION_HEADER)
    return ComplexTrace(hz_to_angular(1.0) * freq, re + 1j * im, TraceKind.REFLECTION)


def read_gain_trace(path: str) -> ComplexTrace:
    freq, gain_db = read_columns(path, GAIN_HEADER)
    return ComplexTrace(hz_to_angular(1.0) * freq, gain_db, TraceKind.GAIN_DB)


def read_field_spectrum_trace(path: str) -> ComplexTrace:
    """Spectrum against magnetic field; the axis is converted to rad/s."""
    b0, signal = read_columns(path, SPECTRUM_HEADER)
    return ComplexTrace(tesla_to_angular(1.0) * b0, signal, TraceKind.REAL_SPECTRUM)


def read_decay_trace(path: str) -> ComplexTrace:
    time_s, signal = read_columns(path, DECAY_HEADER)
    return ComplexTrace(time_s, signal, TraceKind.DECAY)


def read_fieldmap_columns(path: str) -> Dict[str, np.ndarray]:
    cols = read_columns(path, FIELDMAP_HEADER)
    named = dict(zip(FIELDMAP_HEADER, cols))
    named["in_sample"] = named["in_sample"] != 0.0
    return named


def read_tabulated_profile(path: str) -> TabulatedProfile:
    """Tabulated line density against ordinary frequency (per-Hz units)."""
    omega_hz, f_per_hz = read_columns(path, TABULATED_HEADER)
    two_pi = hz_to_angular(1.0)
    return TabulatedProfile(omega=two_pi * omega_hz, density=f_per_hz / two_pi)


def read_discrete_spins(path: str) -> DiscreteSpins:
    omega_hz, g_hz = read_columns(path, DISCRETE_HEADER)
    two_pi = hz_to_angular(1.0)
    return DiscreteSpins(omega=two_pi * omega_hz, g=two_pi * g_hz)


# --------------------------------------------------------------------------
# JSON emission
# --------------------------------------------------------------------------


def dumps_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, allow_nan=False)


def write_json(path: str, payload: dict) -> str:
    text = dumps_json(payload)
    atomic_write_text(path, text + "\n")
    return text


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------


def load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def _section(config: dict, name: str) -> dict:
    try:
        table = config[name]
    except KeyError:
        raise ConfigError(f"missing [{name}] section in config") from None
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(table)


def require_only_sections(config: dict, allowed: Sequence[str]) -> None:
    """Reject top-level tables a command does not understand."""
    extras = sorted(set(config) - set(allowed))
    if extras:
        raise ConfigError(
            "unknown config sections: " + ", ".join(f"[{name}]" for name in extras)
        )


def _number(table: dict, section: str, key: str, *, required: bool = True):
    if key not in table:
        if required:
            raise ConfigError(f"missing {key} in [{section}]")
        return None
    value = table.pop(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} in [{section}] must be a number, got {value!r}")
    return float(value)


def _string(table: dict, section: str, key: str, *, required: bool = True, default=None):
    if key not in table:
        if required:
            raise ConfigError(f"missing {key} in [{section}]")
        return default
    value = table.pop(key)
    if not isinstance(value, str):
        raise ConfigError(f"{key} in [{section}] must be a string, got {value!r}")
    return value


def _no_extras(table: dict, section: str) -> None:
    if table:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(table))}")


def resonator_from_config(config: dict) -> ResonatorParams:
    table = _section(config, "resonator")
    kappa_e = hz_to_angular(_number(table, "resonator", "kappa_e_hz"))
    kappa_i = hz_to_angular(_number(table, "resonator", "kappa_i_hz"))
    omega_r = hz_to_angular(_number(table, "resonator", "omega_r_hz"))
    _no_extras(table, "resonator")
    return ResonatorParams(kappa_e=kappa_e, kappa_i=kappa_i, omega_r=omega_r)


def ensemble_from_config(
    config: dict,
    base_dir: str,
    *,
    default_omega_s: float | None = None,
    require_coupling: bool = True,
) -> SpinEnsemble:
    """Build the spin ensemble named by the [ensemble] table.

    ``profile`` selects the frequency distribution: ``lorentzian``,
    ``gaussian``, ``triple_lorentzian``, ``tabulated`` (with ``table``
    naming a CSV), ``discrete`` (with ``spins_csv``), or ``none`` for a
    bare resonator.  Fit callers that only need the shape may pass
    ``require_coupling=False`` to default a missing coupling to zero.
    """
    table = _section(config, "ensemble")
    kind = _string(table, "ensemble", "profile").lower()
    gamma = hz_to_angular(_number(table, "ensemble", "gamma_hz", required=False) or 0.0)

    def omega_s() -> float:
        value = _number(table, "ensemble", "omega_s_hz",
                        required=default_omega_s is None)
        if value is None:
            return float(default_omega_s)
        return hz_to_angular(value)

    if kind == "discrete":
        path = os.path.join(base_dir, _string(table, "ensemble", "spins_csv"))
        _no_extras(table, "ensemble")
        return SpinEnsemble(profile=read_discrete_spins(path), gamma=gamma)

    g_value = _number(table, "ensemble", "g_ens_hz", required=False)
    if g_value is None:
        if require_coupling and kind != "none":
            raise ConfigError("missing g_ens_hz in [ensemble]")
        g_ens = 0.0
    else:
        g_ens = hz_to_angular(g_value)

    if kind == "none":
        center = omega_s()
        _no_extras(table, "ensemble")
        profile = LorentzianProfile(omega_s=center, fwhm=0.0)
        return SpinEnsemble(profile=profile, gamma=gamma, g_ens=0.0)
    if kind == "lorentzian":
        profile = LorentzianProfile(
            omega_s=omega_s(),
            fwhm=hz_to_angular(_number(table, "ensemble", "fwhm_hz")),
        )
    elif kind == "gaussian":
        profile = GaussianProfile(
            omega_s=omega_s(),
            sigma=hz_to_angular(_number(table, "ensemble", "sigma_hz")),
        )
    elif kind == "triple_lorentzian":
        profile = TripleLorentzianProfile(
            omega_s=omega_s(),
            fwhm=hz_to_angular(_number(table, "ensemble", "fwhm_hz")),
            splitting=hz_to_angular(_number(table, "ensemble", "splitting_hz")),
        )
    elif kind == "tabulated":
        path = os.path.join(base_dir, _string(table, "ensemble", "table"))
        profile = read_tabulated_profile(path)
    else:
        raise ConfigError(f"unknown ensemble profile {kind!r}")
    _no_extras(table, "ensemble")
    return SpinEnsemble(profile=profile, gamma=gamma, g_ens=g_ens)


def _occupation(table: dict, section: str, name: str, omega: float) -> float:
    """One bath occupation from either ``<name>_t_k`` or ``<name>_n``."""
    t_key, n_key = f"{name}_t_k", f"{name}_n"
    has_t, has_n = t_key in table, n_key in table
    if has_t == has_n:
        raise ConfigError(
            f"[{section}] needs exactly one of {t_key} or {n_key}"
        )
    if has_t:
        return bose_occupation(omega, _number(table, section, t_key))
    value = _number(table, section, n_key)
    if value < 0.0:
        raise ConfigError(f"{n_key} in [{section}] must be >= 0, got {value!r}")
    return value


def occupations_from_config(config: dict, omega_r: float):
    """Bath occupations; temperatures are converted at the resonator
    frequency (sweeps here are narrow against omega_r)."""
    from .response import BathOccupations

    table = _section(config, "baths")
    n_in = _occupation(table, "baths", "input", omega_r)
    n_s = _occupation(table, "baths", "spin", omega_r)
    n_i = _occupation(table, "baths", "internal", omega_r)
    _no_extras(table, "baths")
    return BathOccupations(n_in=n_in, n_s=n_s, n_i=n_i)


def chain_from_config(config: dict) -> ChainParams:
    table = _section(config, "chain")
    beta = _number(table, "chain", "beta")
    g_a_db = _number(table, "chain", "g_a_db", required=False)
    if g_a_db is None:
        g_a = _number(table, "chain", "g_a")
    else:
        if "g_a" in table:
            raise ConfigError("[chain] takes g_a or g_a_db, not both")
        g_a = 10.0 ** (g_a_db / 10.0)
    t_a = _number(table, "chain", "t_a_k")
    t_0 = _number(table, "chain", "t_0_k")
    omega = hz_to_angular(_number(table, "chain", "omega_hz"))
    _no_extras(table, "chain")
    return ChainParams(beta=beta, g_a=g_a, t_a=t_a, t_0=t_0, omega=omega)


def sweep_from_config(config: dict) -> np.ndarray:
    table = _section(config, "sweep")
    start = _number(table, "sweep", "start_hz")
    stop = _number(table, "sweep", "stop_hz")
    points = table.pop("points", None)
    _no_extras(table, "sweep")
    if not isinstance(points, int) or isinstance(points, bool):
        raise ConfigError(f"points in [sweep] must be an integer, got {points!r}")
    if points < 2:
        raise ConfigError(f"points in [sweep] must be >= 2, got {points}")
    if not start < stop:
        raise ConfigError(
            f"sweep needs start_hz < stop_hz, got {start!r} >= {stop!r}"
        )
    return hz_to_angular(1.0) * np.linspace(start, stop, points)


def branch_from_name(name: str) -> Branch:
    try:
        return {"amplify": Branch.AMPLIFY, "cool": Branch.COOL}[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown branch {name!r}, expected amplify or cool") from None


def drive_from_config(config: dict) -> dict:
    """Resonator drive settings for the coupling pipeline."""
    table = _section(config, "drive")
    power_w = _number(table, "drive", "power_w", required=False)
    power_dbm = _number(table, "drive", "power_dbm", required=False)
    if (power_w is None) == (power_dbm is None):
        raise ConfigError("[drive] needs exactly one of power_w or power_dbm")
    power = power_w if power_w is not None else dbm_to_watt(power_dbm)
    out = {
        "drive_power": power,
        "kappa_e": hz_to_angular(_number(table, "drive", "kappa_e_hz")),
        "kappa_i": hz_to_angular(_number(table, "drive", "kappa_i_hz")),
        "omega_r": hz_to_angular(_number(table, "drive", "omega_r_hz")),
    }
    _no_extras(table, "drive")
    return out


# --------------------------------------------------------------------------
# measurement JSON
# --------------------------------------------------------------------------


def read_measurement_json(path: str, kind: MeasurementKind) -> NoiseMeasurement:
    """Load an on/off noise measurement for the receiver-chain extraction.

    Keys: ``noise_ratio`` (linear) or ``noise_ratio_db``; maser
    measurements additionally take ``maser_gain`` or ``maser_gain_db``.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read measurement {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: measurement must be a JSON object")
    data = dict(raw)

    def take(name: str, *, required: bool):
        linear, in_db = data.pop(name, None), data.pop(f"{name}_db", None)
        if linear is not None and in_db is not None:
            raise SchemaError(f"{path}: give {name} or {name}_db, not both")
        if linear is None and in_db is None:
            if required:
                raise SchemaError(f"{path}: missing {name} (or {name}_db)")
            return None
        value = linear if linear is not None else 10.0 ** (float(in_db) / 10.0)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{path}: {name} must be a number")
        return float(value)

    ratio = take("noise_ratio", required=True)
    g_m = take("maser_gain", required=kind is MeasurementKind.MASER_ON_OFF)
    if data:
        raise SchemaError(f"{path}: unknown keys {', '.join(sorted(data))}")
    if kind is MeasurementKind.COOLER_ON_OFF and g_m is not None:
        raise SchemaError(f"{path}: maser_gain does not apply to a cooler measurement")
    return NoiseMeasurement(ratio=ratio, kind=kind, g_m=g_m)
