"""Physical constants and unit conversions.

The canonical internal unit for every frequency and rate in this package is
angular frequency in rad/s.  External interfaces (config files, CSV columns)
use ordinary frequency in Hz with field names suffixed ``_hz``; the
conversions in this module are the only place the factor 2*pi appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

__all__ = [
    "HBAR",
    "K_B",
    "GAMMA_E",
    "PhysicalConstants",
    "CONSTANTS",
    "AngularFrequency",
    "Rate",
    "Temperature",
    "hz_to_angular",
    "angular_to_hz",
    "tesla_to_angular",
    "angular_to_tesla",
    "dbm_to_watt",
    "watt_to_dbm",
    "power_ratio_to_db",
    "db_to_power_ratio",
    "require_finite",
]

# CODATA-2018 exact values.
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

# Electron gyromagnetic ratio, gamma_e / 2pi = 28.0 GHz / T.
GAMMA_E = 2.0 * math.pi * 28.0e9  # rad / (s T)


@dataclass(frozen=True)
class PhysicalConstants:
    """Bundle of the fixed constants, for callers that prefer a namespace."""

    hbar: float = HBAR
    k_b: float = K_B
    gamma_e: float = GAMMA_E


CONSTANTS = PhysicalConstants()

# Quantity kinds.  Plain floats with documented units; the aliases exist so
# signatures state what they mean.
AngularFrequency = float  # rad/s
Rate = float  # rad/s, >= 0
Temperature = float  # K, signed (negative = inverted spin bath)


def require_finite(value: float, name: str) -> float:
    """Return ``value`` unchanged, raising if it is NaN or infinite."""
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


def hz_to_angular(f_hz: float) -> float:
    """Convert ordinary frequency (Hz) to angular frequency (rad/s)."""
    require_finite(f_hz, "frequency")
    return 2.0 * math.pi * f_hz


def angular_to_hz(omega: float) -> float:
    """Convert angular frequency (rad/s) to ordinary frequency (Hz)."""
    require_finite(omega, "angular frequency")
    return omega / (2.0 * math.pi)


def tesla_to_angular(b: float) -> float:
    """Convert a magnetic-field interval to angular frequency via gamma_e."""
    require_finite(b, "field")
    return GAMMA_E * b


def angular_to_tesla(omega: float) -> float:
    """Convert an angular-frequency interval to magnetic field via gamma_e."""
    require_finite(omega, "angular frequency")
    return omega / GAMMA_E


def dbm_to_watt(p_dbm: float) -> float:
    """Convert power in dBm to watts."""
    require_finite(p_dbm, "power (dBm)")
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_w: float) -> float:
    """Convert power in watts to dBm.  Requires p_w > 0."""
    require_finite(p_w, "power (W)")
    if p_w <= 0.0:
        raise ValidationError(f"power must be > 0 W for dBm, got {p_w!r}")
    return 10.0 * math.log10(p_w / 1e-3)


def power_ratio_to_db(ratio: float) -> float:
    """Convert a linear power ratio to dB.  Requires ratio > 0."""
    require_finite(ratio, "power ratio")
    if ratio <= 0.0:
        raise ValidationError(f"power ratio must be > 0, got {ratio!r}")
    return 10.0 * math.log10(ratio)


def db_to_power_ratio(db: float) -> float:
    """Convert dB to a linear power ratio."""
    require_finite(db, "dB value")
    return 10.0 ** (db / 10.0)
