"""Thermal occupations and spin polarization / temperature conversions.

Temperatures are signed throughout: a negative spin temperature labels an
inverted ensemble.  An inverted bath at -|T| exchanges quanta at the same
rate as a thermal bath at +|T|, so its occupation is computed with |T| —
that double sign cancellation is deliberate, not an accident of math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InconsistentMeasurementError, ValidationError
from .quantities import HBAR, K_B, require_finite

__all__ = [
    "SpinThermoState",
    "bose_occupation",
    "temperature_from_occupation",
    "polarization_from_temperature",
    "temperature_from_polarization",
    "spin_state_from_echo_enhancement",
]


@dataclass(frozen=True)
class SpinThermoState:
    """Mutually consistent spin polarization and signed spin temperature."""

    rho: float  # in (-1, 1), sign matches t_s
    t_s: float  # K, signed
    omega_s: float  # rad/s

    @property
    def inverted(self) -> bool:
        return self.t_s < 0.0


def bose_occupation(omega: float, t: float) -> float:
    """Thermal photon occupation of a mode at ``omega`` for bath ``t``.

    ``t`` may be negative (inverted spin bath); the occupation then equals
    that of the corresponding positive temperature.
    """
    require_finite(omega, "omega")
    require_finite(t, "temperature")
    if omega <= 0.0:
        raise ValidationError(f"omega must be > 0, got {omega!r}")
    if t == 0.0:
        raise ValidationError("occupation undefined at exactly 0 K")
    x = HBAR * omega / (K_B * abs(t))
    if x > 700.0:  # expm1 would overflow; n ~ exp(-x) here anyway
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def temperature_from_occupation(omega: float, n: float) -> float:
    """Temperature whose thermal occupation at ``omega`` equals ``n`` > 0."""
    require_finite(omega, "omega")
    require_finite(n, "occupation")
    if omega <= 0.0:
        raise ValidationError(f"omega must be > 0, got {omega!r}")
    if n <= 0.0:
        raise ValidationError(f"occupation must be > 0, got {n!r}")
    return HBAR * omega / (K_B * math.log1p(1.0 / n))


def _atanh_stable(x: float) -> float:
    """atanh via log1p, accurate as |x| approaches 1."""
    return 0.5 * (math.log1p(x) - math.log1p(-x))


def polarization_from_temperature(omega_s: float, t_s: float) -> float:
    """Two-level polarization tanh(hbar*omega/(2 kB T)); odd in ``t_s``."""
    require_finite(omega_s, "omega_s")
    require_finite(t_s, "temperature")
    if omega_s <= 0.0:
        raise ValidationError(f"omega_s must be > 0, got {omega_s!r}")
    if t_s == 0.0:
        raise ValidationError("polarization undefined at exactly 0 K")
    return math.tanh(HBAR * omega_s / (2.0 * K_B * t_s))


def temperature_from_polarization(omega_s: float, rho: float) -> float:
    """Signed temperature with the given polarization at ``omega_s``."""
    require_finite(omega_s, "omega_s")
    require_finite(rho, "polarization")
    if omega_s <= 0.0:
        raise ValidationError(f"omega_s must be > 0, got {omega_s!r}")
    if rho == 0.0 or abs(rho) >= 1.0:
        raise ValidationError(
            f"polarization must satisfy 0 < |rho| < 1, got {rho!r}"
        )
    return HBAR * omega_s / (2.0 * K_B * _atanh_stable(rho))


def spin_state_from_echo_enhancement(
    chi: float, t0: float, omega_s: float
) -> SpinThermoState:
    """Spin state implied by an echo-enhancement factor ``chi``.

    The enhanced polarization is ``chi`` times the thermal polarization at
    the reference temperature ``t0``; ``chi`` is negative for an inverted
    ensemble.  Raises when the implied polarization leaves (-1, 1).
    """
    require_finite(chi, "enhancement")
    if chi == 0.0:
        raise ValidationError("enhancement must be nonzero")
    if t0 <= 0.0:
        raise ValidationError(f"reference temperature must be > 0 K, got {t0!r}")
    rho = chi * polarization_from_temperature(omega_s, t0)
    if abs(rho) >= 1.0:
        raise InconsistentMeasurementError(
            f"enhancement {chi:g} implies |polarization| = {abs(rho):.4g} >= 1"
        )
    return SpinThermoState(
        rho=rho,
        t_s=temperature_from_polarization(omega_s, rho),
        omega_s=omega_s,
    )
