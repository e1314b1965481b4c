"""Resonator reflection, gain, and noise spectra with a coupled spin ensemble.

The single-port resonator reflection is

    r(omega) = i*kappa_e / (omega - omega_r + i*kappa_bar +/- K(omega)) - 1

where ``K`` is the complex spin spectral function.  The ``+`` sign applies
to an inverted (amplifying) ensemble and the ``-`` sign to a thermal
(cooling) ensemble; both branches share every formula below up to that
sign.  Gain in dB is 20*log10|r|, which equals 10*log10 of the power gain
|r|^2.

Gain-bandwidth products use the voltage-gain convention
GBP = sqrt(G_m) * FWHM, the standard for negative-resistance amplifiers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import OscillationThresholdError, ValidationError
from .quantities import angular_to_hz, require_finite
from .spins import SpinEnsemble, emission_density, emission_rate, spin_susceptibility

__all__ = [
    "GAIN_FLOOR_DB",
    "THRESHOLD_RTOL",
    "Branch",
    "ResonatorParams",
    "BathOccupations",
    "NoiseCoefficients",
    "CompressionPoint",
    "reflection",
    "gain_spectrum",
    "peak_gain",
    "noise_coefficients",
    "output_noise",
    "input_referred_noise",
    "bandwidth_and_gbp",
    "compression_point",
    "input_referred_from_output",
    "threshold_margin",
]

Spectrum = Union[float, np.ndarray]

# Relative margin below which kappa_s is considered exactly at the
# oscillation threshold kappa_e + kappa_i; the linear steady state is
# singular there and evaluation refuses rather than divides by ~0.
THRESHOLD_RTOL = 1e-9

# Reported gain when |r| underflows the log (e.g. a perfect dip).
GAIN_FLOOR_DB = -300.0


class Branch(enum.Enum):
    """Sign of the spin term in the reflection denominator."""

    AMPLIFY = "amplify"  # inverted ensemble: +K(omega), can have |r| > 1
    COOL = "cool"  # thermal ensemble: -K(omega), always |r| <= 1

    @property
    def sign(self) -> float:
        return 1.0 if self is Branch.AMPLIFY else -1.0


@dataclass(frozen=True)
class ResonatorParams:
    """Bare resonator mode: frequency plus external and internal loss rates.

    All fields are angular (rad/s).  ``kappa_bar`` is the half-sum
    (kappa_e + kappa_i)/2 appearing in the reflection denominator.
    """

    omega_r: float
    kappa_e: float
    kappa_i: float

    def __post_init__(self) -> None:
        require_finite(self.omega_r, "omega_r")
        require_finite(self.kappa_e, "kappa_e")
        require_finite(self.kappa_i, "kappa_i")
        if self.omega_r <= 0.0:
            raise ValidationError(f"omega_r must be > 0, got {self.omega_r!r}")
        if self.kappa_e <= 0.0:
            raise ValidationError(f"kappa_e must be > 0, got {self.kappa_e!r}")
        if self.kappa_i < 0.0:
            raise ValidationError(f"kappa_i must be >= 0, got {self.kappa_i!r}")

    @property
    def kappa_bar(self) -> float:
        return 0.5 * (self.kappa_e + self.kappa_i)

    @property
    def kappa_total(self) -> float:
        return self.kappa_e + self.kappa_i


@dataclass(frozen=True)
class BathOccupations:
    """Mean photon numbers of the input, spin, and internal-loss baths."""

    n_in: float
    n_s: float
    n_i: float

    def __post_init__(self) -> None:
        for name in ("n_in", "n_s", "n_i"):
            value = getattr(self, name)
            require_finite(value, name)
            if value < 0.0:
                raise ValidationError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class NoiseCoefficients:
    """Weights of the three baths in the output noise spectrum.

    ``r_in`` = |r|^2 (reflected input / power gain), ``r_s`` the spin-bath
    weight, ``r_i`` the internal-loss weight.  Fields are scalars or arrays
    matching the evaluation grid.  At every frequency the branch sum rule
    holds: amplify r_in - r_s + r_i = 1, cool r_in + r_s + r_i = 1.
    """

    r_in: Spectrum
    r_s: Spectrum
    r_i: Spectrum


@dataclass(frozen=True)
class CompressionPoint:
    """1 dB gain-compression point extracted from a power sweep."""

    input_dbm: float
    output_dbm: float
    small_signal_gain_db: float


def threshold_margin(res: ResonatorParams, ens: SpinEnsemble) -> float:
    """Fractional distance of kappa_s below the oscillation threshold.

    Positive below threshold, zero at threshold, negative above.
    """
    return (res.kappa_total - emission_rate(ens)) / res.kappa_total


def _require_off_threshold(res: ResonatorParams, ens: SpinEnsemble) -> None:
    kappa_s = emission_rate(ens)
    if abs(res.kappa_total - kappa_s) < THRESHOLD_RTOL * res.kappa_total:
        raise OscillationThresholdError(res.kappa_e, res.kappa_i, kappa_s)


def _denominator(
    res: ResonatorParams, ens: SpinEnsemble, branch: Branch, omega: Spectrum
):
    chi = spin_susceptibility(ens, omega)
    return (np.asarray(omega, dtype=float) - res.omega_r) + (
        1j * res.kappa_bar + branch.sign * chi
    )


def reflection(
    res: ResonatorParams,
    ens: SpinEnsemble,
    branch: Branch,
    omega: Spectrum,
) -> Union[complex, np.ndarray]:
    """Complex reflection coefficient at ``omega`` (scalar or array).

    On the amplify branch, raises :class:`OscillationThresholdError` when
    the ensemble emission rate sits at the instability kappa_e + kappa_i.
    """
    if branch is Branch.AMPLIFY:
        _require_off_threshold(res, ens)
    r = 1j * res.kappa_e / _denominator(res, ens, branch, omega) - 1.0
    if np.isscalar(omega):
        return complex(r)
    return r


def gain_spectrum(
    res: ResonatorParams,
    ens: SpinEnsemble,
    branch: Branch,
    grid: np.ndarray,
) -> np.ndarray:
    """Gain in dB over a frequency grid; returns rows of (omega, gain_db).

    Gain is 20*log10|r|, floored at ``GAIN_FLOOR_DB`` where the reflection
    vanishes.  A non-finite reflection at an isolated grid point yields a
    non-finite gain at that point only; the sweep itself never aborts.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("frequency grid must be a nonempty 1-D array")
    if grid.size > 1 and not np.all(np.diff(grid) > 0.0):
        raise ValidationError("frequency grid must be strictly increasing")
    r = reflection(res, ens, branch, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain_db = 20.0 * np.log10(np.abs(r))
    return np.column_stack([grid, np.maximum(gain_db, GAIN_FLOOR_DB)])


def peak_gain(kappa_e: float, kappa_i: float, kappa_s: float) -> float:
    """On-resonance power gain ((k_e - k_i + k_s)/(k_e + k_i - k_s))^2.

    Valid when the spin center coincides with the resonator frequency.
    Raises :class:`OscillationThresholdError` at kappa_s = kappa_e+kappa_i.
    """
    require_finite(kappa_e, "kappa_e")
    require_finite(kappa_i, "kappa_i")
    require_finite(kappa_s, "kappa_s")
    if kappa_e <= 0.0:
        raise ValidationError(f"kappa_e must be > 0, got {kappa_e!r}")
    if kappa_i < 0.0 or kappa_s < 0.0:
        raise ValidationError("kappa_i and kappa_s must be >= 0")
    total = kappa_e + kappa_i
    if abs(total - kappa_s) < THRESHOLD_RTOL * total:
        raise OscillationThresholdError(kappa_e, kappa_i, kappa_s)
    return ((kappa_e - kappa_i + kappa_s) / (total - kappa_s)) ** 2


def noise_coefficients(
    res: ResonatorParams,
    ens: SpinEnsemble,
    branch: Branch,
    omega: Spectrum,
) -> NoiseCoefficients:
    """Bath weights r_in = |r|^2, r_s = k_e C/|D|^2, r_i = k_e k_i/|D|^2."""
    if branch is Branch.AMPLIFY:
        _require_off_threshold(res, ens)
    denom = _denominator(res, ens, branch, omega)
    c = emission_density(ens, omega)
    abs2 = denom.real**2 + denom.imag**2
    r = 1j * res.kappa_e / denom - 1.0
    r_in = r.real**2 + r.imag**2
    if np.isscalar(omega):
        return NoiseCoefficients(
            r_in=float(r_in),
            r_s=float(res.kappa_e * c / abs2),
            r_i=float(res.kappa_e * res.kappa_i / abs2),
        )
    return NoiseCoefficients(
        r_in=r_in,
        r_s=res.kappa_e * c / abs2,
        r_i=res.kappa_e * res.kappa_i / abs2,
    )


def output_noise(
    res: ResonatorParams,
    ens: SpinEnsemble,
    branch: Branch,
    occ: BathOccupations,
    omega: Spectrum,
) -> Spectrum:
    """Output noise spectrum in photons, zero-point half included per bath:

    n_out = r_in (n_in + 1/2) + r_s (n_s + 1/2) + r_i (n_i + 1/2)
    """
    nc = noise_coefficients(res, ens, branch, omega)
    return (
        nc.r_in * (occ.n_in + 0.5)
        + nc.r_s * (occ.n_s + 0.5)
        + nc.r_i * (occ.n_i + 0.5)
    )


def input_referred_noise(
    res: ResonatorParams,
    ens: SpinEnsemble,
    occ: BathOccupations,
    omega: Spectrum,
) -> Spectrum:
    """Added noise of the amplify branch referred to its input, in photons:

    n_m = (r_s/r_in)(n_s + 1/2) + (r_i/r_in)(n_i + 1/2)

    Defined only where the power gain r_in is nonzero.
    """
    nc = noise_coefficients(res, ens, Branch.AMPLIFY, omega)
    if np.any(np.asarray(nc.r_in) == 0.0):
        raise ValidationError(
            "input-referred noise undefined at zero gain (r_in = 0)"
        )
    return (nc.r_s * (occ.n_s + 0.5) + nc.r_i * (occ.n_i + 0.5)) / nc.r_in


def bandwidth_and_gbp(spectrum: np.ndarray) -> "tuple[float, float]":
    """Half-power bandwidth and gain-bandwidth product of a gain spectrum.

    ``spectrum`` holds rows of (omega_rad_s, gain_db) as produced by
    :func:`gain_spectrum`.  The full width is measured 10*log10(2) dB
    (half power) below the peak by linear interpolation and returned in
    Hz together with GBP = sqrt(G_m) * FWHM, G_m the linear power gain.
    """
    arr = np.asarray(spectrum, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValidationError(
            "spectrum must be an (n, 2) array of (omega, gain_db), n >= 3"
        )
    omega, gain_db = arr[:, 0], arr[:, 1]
    if not np.all(np.diff(omega) > 0.0):
        raise ValidationError("spectrum frequencies must be strictly increasing")
    peak_idx = int(np.argmax(gain_db))
    peak_db = gain_db[peak_idx]
    if not peak_db > 3.0:
        raise ValidationError(
            f"no gain peak above 3 dB (maximum {peak_db:.3f} dB)"
        )
    if peak_idx in (0, arr.shape[0] - 1):
        raise ValidationError("gain peak lies at the grid edge")
    level = peak_db - 10.0 * math.log10(2.0)

    left = np.nonzero(gain_db[:peak_idx] <= level)[0]
    right = np.nonzero(gain_db[peak_idx:] <= level)[0]
    if left.size == 0 or right.size == 0:
        raise ValidationError("half-power points not bracketed by the grid")
    j = int(left[-1])  # gain_db[j] <= level < gain_db[j+1]
    omega_lo = np.interp(
        level, [gain_db[j], gain_db[j + 1]], [omega[j], omega[j + 1]]
    )
    k = peak_idx + int(right[0])  # gain_db[k] <= level < gain_db[k-1]
    omega_hi = np.interp(
        level, [gain_db[k], gain_db[k - 1]], [omega[k], omega[k - 1]]
    )

    fwhm_hz = angular_to_hz(float(omega_hi - omega_lo))
    gbp_hz = math.sqrt(10.0 ** (peak_db / 10.0)) * fwhm_hz
    return fwhm_hz, gbp_hz


def compression_point(curve: np.ndarray) -> CompressionPoint:
    """1 dB compression point of a measured gain-vs-power curve.

    ``curve`` holds rows of (p_in_dbm, gain_db) with strictly increasing
    power.  The small-signal gain is the median over the lowest-power 20%
    of points; the compression point is where the gain first drops 1 dB
    below it, linearly interpolated.  The output-referred power is the
    input power plus the compressed gain, input_dbm + (G_ss - 1 dB).
    """
    arr = np.asarray(curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 5:
        raise ValidationError(
            "curve must be an (n, 2) array of (p_in_dbm, gain_db), n >= 5"
        )
    p_in, gain_db = arr[:, 0], arr[:, 1]
    if not np.all(np.diff(p_in) > 0.0):
        raise ValidationError("input powers must be strictly increasing")
    n_small = max(1, arr.shape[0] // 5)
    g_ss = float(np.median(gain_db[:n_small]))
    target = g_ss - 1.0
    below = np.nonzero(gain_db <= target)[0]
    if below.size == 0:
        raise ValidationError("no 1 dB compression within data range")
    i = int(below[0])
    if i == 0:
        raise ValidationError("gain already compressed at the lowest power")
    # gain falls through the target between i-1 and i
    p_1db = float(
        np.interp(target, [gain_db[i], gain_db[i - 1]], [p_in[i], p_in[i - 1]])
    )
    return CompressionPoint(
        input_dbm=p_1db,
        output_dbm=p_1db + (g_ss - 1.0),
        small_signal_gain_db=g_ss,
    )


def input_referred_from_output(output_dbm: float, gain_db: float) -> float:
    """Project an output-referred power back to the amplifier input."""
    require_finite(output_dbm, "output_dbm")
    require_finite(gain_db, "gain_db")
    return output_dbm - gain_db
