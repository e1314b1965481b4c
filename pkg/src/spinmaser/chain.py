"""Receiver-chain noise model and its inversion to device noise temperatures.

The device under test (the spin maser amplifier or cooler) feeds a lossy
line of transmissivity ``beta`` followed by a second-stage amplifier with
power gain ``g_a`` and noise temperature ``t_a``; the input load and the
loss sit at the ambient temperature ``t_0``.  With thermal occupations
``n_0 = n(t_0)`` and ``n_a = n(t_a)`` at the measurement frequency, the
noise at the chain output is

    off baseline:  n_off = g_a (n_0 + 1/2) + (g_a - 1)(n_a + 1/2)
    device on:     n_on  = g_a beta d + g_a (1 - beta)(n_0 + 1/2)
                           + (g_a - 1)(n_a + 1/2)

where ``d`` is the device output noise in photons.  For the maser,
``d = g_m (n_0 + 1/2 + n_m)`` defines the input-referred added noise
``n_m`` (no vacuum half of its own); for the cooler, ``d = n_c`` is the
total output noise including the vacuum half.  Measured on/off ratios
(``g_n`` for the maser, ``r_n`` for the cooler) invert these relations.

Conventions fixed here:

* The exact inversion (keeping ``g_a - 1``) is the default everywhere;
  ``large_gain_approx=True`` selects the classic ``g_a - 1 ~ g_a``
  shortcut, under which ``g_a`` cancels from every ratio.
* Maser temperatures convert from ``n_m`` directly (added noise is
  thermal-like); cooler temperatures convert from the thermal part
  ``n_c - 1/2`` so that a passive room-temperature device reports the
  ambient temperature exactly.
* The linear-temperature helpers implement the Rayleigh-Jeans limit
  (k_B T >> hbar omega), in which every occupation-plus-half is
  proportional to its temperature and ``g_a`` drops out.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import InconsistentMeasurementError, ValidationError
from .quantities import require_finite
from .response import BathOccupations, Branch, ResonatorParams, output_noise
from .spins import SpinEnsemble
from .thermo import bose_occupation, temperature_from_occupation

__all__ = [
    "BETA_UNCERTAINTY_DB",
    "MeasurementKind",
    "ChainParams",
    "NoiseMeasurement",
    "ExtractionInterval",
    "forward_output_noise",
    "extract_maser_noise",
    "extract_cooler_temperature",
    "extract_with_uncertainty",
    "maser_ratio_from_temperatures",
    "maser_temperature_from_ratio",
    "cooler_temperature_from_ratio",
    "noise_ratio_from_psd_db",
    "predict_cooling_spectrum",
]

# Insertion-loss uncertainty on the device-to-amplifier path, in dB.
BETA_UNCERTAINTY_DB = 0.1


class MeasurementKind(Enum):
    """Which on/off noise-power ratio a measurement reports."""

    MASER_ON_OFF = "maser_on_off"
    COOLER_ON_OFF = "cooler_on_off"


@dataclass(frozen=True)
class ChainParams:
    """Receiver chain between the device output and the power detector."""

    beta: float  # line transmissivity, in (0, 1]
    g_a: float  # second-stage power gain, linear, > 1
    t_a: float  # second-stage noise temperature, K
    t_0: float  # ambient temperature, K
    omega: float  # measurement frequency, rad/s

    def __post_init__(self) -> None:
        require_finite(self.beta, "beta")
        require_finite(self.g_a, "g_a")
        require_finite(self.t_a, "t_a")
        require_finite(self.t_0, "t_0")
        require_finite(self.omega, "omega")
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError(f"beta must be in (0, 1], got {self.beta!r}")
        if self.g_a <= 1.0:
            raise ValidationError(f"g_a must be > 1, got {self.g_a!r}")
        if self.t_a <= 0.0:
            raise ValidationError(f"t_a must be > 0 K, got {self.t_a!r}")
        if self.t_0 <= 0.0:
            raise ValidationError(f"t_0 must be > 0 K, got {self.t_0!r}")
        if self.omega <= 0.0:
            raise ValidationError(f"omega must be > 0, got {self.omega!r}")

    @property
    def ambient_occupation(self) -> float:
        """Thermal occupation n_0 of the ambient load at ``omega``."""
        return bose_occupation(self.omega, self.t_0)

    @property
    def amplifier_occupation(self) -> float:
        """Thermal occupation n_a of the second-stage noise at ``omega``."""
        return bose_occupation(self.omega, self.t_a)


@dataclass(frozen=True)
class NoiseMeasurement:
    """A measured on/off noise-power ratio.

    ``ratio`` is the on/off power ratio (g_n for the maser, r_n for the
    cooler).  ``g_m`` is the maser's calibrated peak power gain (linear),
    required for maser measurements and meaningless for cooler ones.
    """

    ratio: float
    kind: MeasurementKind
    g_m: Optional[float] = None

    def __post_init__(self) -> None:
        require_finite(self.ratio, "ratio")
        if self.ratio <= 0.0:
            raise ValidationError(f"ratio must be > 0, got {self.ratio!r}")
        if self.kind is MeasurementKind.MASER_ON_OFF:
            if self.g_m is None:
                raise ValidationError("maser measurements require g_m")
            require_finite(self.g_m, "g_m")
            if self.g_m < 1.0:
                raise ValidationError(
                    f"maser peak gain g_m must be >= 1, got {self.g_m!r}"
                )
            if self.ratio < 1.0:
                raise ValidationError(
                    f"maser on/off ratio must be >= 1, got {self.ratio!r}"
                )
        elif self.g_m is not None:
            raise ValidationError("g_m applies only to maser measurements")


@dataclass(frozen=True)
class ExtractionInterval:
    """Extraction result with its insertion-loss uncertainty interval.

    ``n``/``t`` are the nominal photon number and temperature (K); the
    low/high bounds come from re-extracting at the transmissivity bounds
    ``beta_low``/``beta_high``.
    """

    n: float
    t: float
    n_low: float
    n_high: float
    t_low: float
    t_high: float
    beta_low: float
    beta_high: float


def _half_sums(chain: ChainParams) -> "tuple[float, float]":
    return chain.ambient_occupation + 0.5, chain.amplifier_occupation + 0.5


def forward_output_noise(
    chain: ChainParams,
    device_output: float,
    *,
    off_baseline: bool = False,
    large_gain_approx: bool = False,
) -> float:
    """Noise in photons at the chain output for a given device output.

    With ``off_baseline=True`` the device is bypassed (input load looks
    straight into the chain) and ``device_output`` is ignored.
    """
    n0h, nah = _half_sums(chain)
    second_stage = chain.g_a if large_gain_approx else chain.g_a - 1.0
    if off_baseline:
        return chain.g_a * n0h + second_stage * nah
    require_finite(device_output, "device_output")
    if device_output < 0.0:
        raise ValidationError(
            f"device output noise must be >= 0, got {device_output!r}"
        )
    return (
        chain.g_a * chain.beta * device_output
        + chain.g_a * (1.0 - chain.beta) * n0h
        + second_stage * nah
    )


def _require_kind(meas: NoiseMeasurement, kind: MeasurementKind) -> None:
    if meas.kind is not kind:
        raise ValidationError(
            f"expected a {kind.value} measurement, got {meas.kind.value}"
        )


def extract_maser_noise(
    meas: NoiseMeasurement,
    chain: ChainParams,
    *,
    large_gain_approx: bool = False,
) -> "tuple[float, float]":
    """Invert a maser on/off ratio to (n_m, t_m).

    ``n_m`` is the input-referred added noise in photons; ``t_m`` its
    temperature at ``chain.omega`` (0.0 when the added noise is zero or
    lies below zero within the vacuum allowance).
    """
    _require_kind(meas, MeasurementKind.MASER_ON_OFF)
    n0h, nah = _half_sums(chain)
    g_n, g_m, beta = meas.ratio, meas.g_m, chain.beta
    if large_gain_approx:
        amplified = (
            g_n * (n0h + nah) - (1.0 - beta) * n0h - nah
        ) / (g_m * beta)
    else:
        g_a = chain.g_a
        n_off = g_a * n0h + (g_a - 1.0) * nah
        amplified = (
            g_n * n_off - g_a * (1.0 - beta) * n0h - (g_a - 1.0) * nah
        ) / (g_a * g_m * beta)
    n_m = amplified - n0h
    if n_m <= -0.5:
        raise InconsistentMeasurementError(
            f"extracted maser noise n_m = {n_m:.6g} photons lies below the "
            "vacuum floor of -1/2"
        )
    t_m = temperature_from_occupation(chain.omega, n_m) if n_m > 0.0 else 0.0
    return n_m, t_m


def extract_cooler_temperature(
    meas: NoiseMeasurement,
    chain: ChainParams,
    *,
    large_gain_approx: bool = False,
) -> "tuple[float, float]":
    """Invert a cooler on/off ratio to (n_c, t_c).

    ``n_c`` is the device's total output noise in photons, vacuum half
    included; ``t_c`` converts its thermal part ``n_c - 1/2`` so that a
    passive device at ambient reports ``t_0`` exactly (0.0 at or below
    the vacuum floor).
    """
    _require_kind(meas, MeasurementKind.COOLER_ON_OFF)
    n0h, nah = _half_sums(chain)
    r_n, beta = meas.ratio, chain.beta
    if large_gain_approx:
        n_c = (r_n * (n0h + nah) - (1.0 - beta) * n0h - nah) / beta
    else:
        g_a = chain.g_a
        n_off = g_a * n0h + (g_a - 1.0) * nah
        n_c = (
            r_n * n_off - g_a * (1.0 - beta) * n0h - (g_a - 1.0) * nah
        ) / (g_a * beta)
    if n_c <= 0.0:
        raise InconsistentMeasurementError(
            f"extracted cooler output noise n_c = {n_c:.6g} photons is not "
            "positive"
        )
    thermal = n_c - 0.5
    t_c = temperature_from_occupation(chain.omega, thermal) if thermal > 0.0 else 0.0
    return n_c, t_c


def extract_with_uncertainty(
    meas: NoiseMeasurement,
    chain: ChainParams,
    *,
    large_gain_approx: bool = False,
    beta_uncertainty_db: float = BETA_UNCERTAINTY_DB,
) -> ExtractionInterval:
    """Extraction at beta and at beta shifted by +/- the insertion-loss
    uncertainty in dB, reported as a (low, high) interval."""
    require_finite(beta_uncertainty_db, "beta_uncertainty_db")
    if beta_uncertainty_db < 0.0:
        raise ValidationError("beta uncertainty (dB) must be >= 0")
    scale = 10.0 ** (beta_uncertainty_db / 10.0)
    beta_low = chain.beta / scale
    beta_high = min(1.0, chain.beta * scale)
    if meas.kind is MeasurementKind.MASER_ON_OFF:
        extract = extract_maser_noise
    else:
        extract = extract_cooler_temperature
    results = []
    for beta in (beta_low, chain.beta, beta_high):
        varied = ChainParams(
            beta=beta,
            g_a=chain.g_a,
            t_a=chain.t_a,
            t_0=chain.t_0,
            omega=chain.omega,
        )
        results.append(extract(meas, varied, large_gain_approx=large_gain_approx))
    (n_nom, t_nom) = results[1]
    ns = [n for n, _ in results]
    ts = [t for _, t in results]
    return ExtractionInterval(
        n=n_nom,
        t=t_nom,
        n_low=min(ns),
        n_high=max(ns),
        t_low=min(ts),
        t_high=max(ts),
        beta_low=beta_low,
        beta_high=beta_high,
    )


def _require_linear_t_args(beta: float, t_0: float, t_a: float) -> None:
    require_finite(beta, "beta")
    require_finite(t_0, "t_0")
    require_finite(t_a, "t_a")
    if not 0.0 < beta <= 1.0:
        raise ValidationError(f"beta must be in (0, 1], got {beta!r}")
    if t_0 <= 0.0 or t_a <= 0.0:
        raise ValidationError("temperatures must be > 0 K")


def maser_ratio_from_temperatures(
    g_m: float, beta: float, t_0: float, t_a: float, t_m: float
) -> float:
    """On/off ratio g_n in the linear-temperature (k_B T >> hbar w) limit:

    g_n = [g_m beta (t_0 + t_m) + (1 - beta) t_0 + t_a] / (t_0 + t_a)
    """
    _require_linear_t_args(beta, t_0, t_a)
    require_finite(g_m, "g_m")
    require_finite(t_m, "t_m")
    if g_m < 1.0:
        raise ValidationError(f"g_m must be >= 1, got {g_m!r}")
    if t_m < 0.0:
        raise ValidationError(f"t_m must be >= 0 K, got {t_m!r}")
    return (g_m * beta * (t_0 + t_m) + (1.0 - beta) * t_0 + t_a) / (t_0 + t_a)


def maser_temperature_from_ratio(
    g_n: float, g_m: float, beta: float, t_0: float, t_a: float
) -> float:
    """Maser noise temperature in the linear-temperature limit:

    t_m = [g_n (t_0 + t_a) - (1 - beta) t_0 - t_a] / (g_m beta) - t_0
    """
    _require_linear_t_args(beta, t_0, t_a)
    require_finite(g_n, "g_n")
    require_finite(g_m, "g_m")
    if g_m < 1.0:
        raise ValidationError(f"g_m must be >= 1, got {g_m!r}")
    if g_n <= 0.0:
        raise ValidationError(f"g_n must be > 0, got {g_n!r}")
    return (g_n * (t_0 + t_a) - (1.0 - beta) * t_0 - t_a) / (g_m * beta) - t_0


def cooler_temperature_from_ratio(
    r_n: float, beta: float, t_0: float, t_a: float
) -> float:
    """Cooler output temperature in the linear-temperature limit:

    t_c = [r_n (t_0 + t_a) - (1 - beta) t_0 - t_a] / beta
    """
    _require_linear_t_args(beta, t_0, t_a)
    require_finite(r_n, "r_n")
    if r_n <= 0.0:
        raise ValidationError(f"r_n must be > 0, got {r_n!r}")
    return (r_n * (t_0 + t_a) - (1.0 - beta) * t_0 - t_a) / beta


def noise_ratio_from_psd_db(
    psd_on_db: Union[float, np.ndarray], psd_off_db: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """Linear on/off power ratio from two PSD levels in dB(m) units.

    Any common reference (dBm/Hz, dBm in a fixed bandwidth) cancels in
    the difference.
    """
    scalar = np.isscalar(psd_on_db) and np.isscalar(psd_off_db)
    on = np.asarray(psd_on_db, dtype=float)
    off = np.asarray(psd_off_db, dtype=float)
    if not (np.all(np.isfinite(on)) and np.all(np.isfinite(off))):
        raise ValidationError("PSD levels must be finite")
    ratio = np.power(10.0, (on - off) / 10.0)
    return float(ratio) if scalar else ratio


def predict_cooling_spectrum(
    res: ResonatorParams,
    ens: SpinEnsemble,
    occ: BathOccupations,
    chain: ChainParams,
    grid: np.ndarray,
) -> np.ndarray:
    """Predicted on/off receiver noise ratio in dB over a frequency grid.

    Rows are (omega, ratio_db) with ratio_db = 10 log10(n_on / n_off);
    negative values mean the device cools the measurement band below the
    passive baseline.  Identically 0 dB when every bath sits at the
    chain ambient temperature.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("frequency grid must be a nonempty 1-D array")
    if grid.size > 1 and not np.all(np.diff(grid) > 0.0):
        raise ValidationError("frequency grid must be strictly increasing")
    n0h, nah = _half_sums(chain)
    device = output_noise(res, ens, Branch.COOL, occ, grid)
    n_on = (
        chain.g_a * chain.beta * device
        + chain.g_a * (1.0 - chain.beta) * n0h
        + (chain.g_a - 1.0) * nah
    )
    n_off = chain.g_a * n0h + (chain.g_a - 1.0) * nah
    ratio_db = 10.0 * np.log10(n_on / n_off)
    return np.column_stack([grid, ratio_db])
