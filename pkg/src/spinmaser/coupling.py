"""Spin-photon coupling strength from simulated mode-field data.

Given a cell-by-cell map of the resonator drive field B1 (classical
amplitude at drive power ``drive_power``), this module reduces it to

* the intra-resonator photon number  n_bar = 4 k_e P / (hbar w_r (k_e+k_i)^2),
* the vacuum single-spin coupling    g0 = gamma_e (1/sqrt 2) |B1_perp| / (2 sqrt n_bar),
* the magnetic filling factor        eta = sum_sample |B1_perp|^2 V / sum_all |B1|^2 V,
* the magnetic mode volume           v_m = sum_all |B1|^2 V / max |B1|^2.

The spin quantization axis and the static field lie along x, so the
transverse (spin-driving) components are y and z: |B1_perp|^2 = B1y^2 + B1z^2.
The 1/sqrt(2) is the transition matrix element for the driven pair of
levels.  Scaling the drive power by c scales every B1 by sqrt(c) and
n_bar by c, leaving g0 unchanged — g0 is a vacuum property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .quantities import GAMMA_E, HBAR, require_finite

__all__ = [
    "FieldMap",
    "CouplingResult",
    "mean_photon_number",
    "single_spin_coupling",
    "ensemble_coupling",
    "combined_coupling",
    "filling_factor",
    "mode_volume",
    "sample_mean_transverse_field",
    "coupling_pipeline",
]


@dataclass(frozen=True, eq=False)
class FieldMap:
    """Cell-by-cell drive-field map with the drive conditions that made it.

    Arrays are parallel over cells: ``volume`` in m^3 (> 0), the three
    field components in tesla, and ``in_sample`` flagging cells inside
    the spin-hosting sample.
    """

    volume: np.ndarray
    b1x: np.ndarray
    b1y: np.ndarray
    b1z: np.ndarray
    in_sample: np.ndarray
    drive_power: float  # W
    kappa_e: float  # rad/s
    kappa_i: float  # rad/s
    omega_r: float  # rad/s

    def __post_init__(self):
        volume = np.array(self.volume, dtype=float)
        b1x = np.array(self.b1x, dtype=float)
        b1y = np.array(self.b1y, dtype=float)
        b1z = np.array(self.b1z, dtype=float)
        in_sample = np.array(self.in_sample, dtype=bool)
        if volume.ndim != 1 or volume.size == 0:
            raise ValidationError("field map needs at least one cell")
        for name, arr in [
            ("b1x", b1x),
            ("b1y", b1y),
            ("b1z", b1z),
            ("in_sample", in_sample),
        ]:
            if arr.shape != volume.shape:
                raise ValidationError(
                    f"field-map column {name} does not match the cell count"
                )
        if not np.all(volume > 0.0):
            raise ValidationError("cell volumes must be > 0")
        fields = np.concatenate([b1x, b1y, b1z])
        if not np.all(np.isfinite(fields)):
            raise ValidationError("field amplitudes must be finite")
        require_finite(self.drive_power, "drive_power")
        require_finite(self.kappa_e, "kappa_e")
        require_finite(self.kappa_i, "kappa_i")
        require_finite(self.omega_r, "omega_r")
        if self.drive_power < 0.0:
            raise ValidationError("drive power must be >= 0 W")
        if self.kappa_e <= 0.0:
            raise ValidationError("kappa_e must be > 0")
        if self.kappa_i < 0.0:
            raise ValidationError("kappa_i must be >= 0")
        if self.omega_r <= 0.0:
            raise ValidationError("omega_r must be > 0")
        for name, arr in [
            ("volume", volume),
            ("b1x", b1x),
            ("b1y", b1y),
            ("b1z", b1z),
            ("in_sample", in_sample),
        ]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class CouplingResult:
    """Outputs of the coupling pipeline."""

    g0: float  # rad/s
    n_bar: float  # photons
    eta: float  # filling factor in [0, 1]
    v_m: float  # mode volume, m^3


def mean_photon_number(
    p_m: float, kappa_e: float, kappa_i: float, omega_r: float
) -> float:
    """Steady-state photon number for on-resonance drive power ``p_m``."""
    require_finite(p_m, "drive power")
    require_finite(kappa_e, "kappa_e")
    require_finite(kappa_i, "kappa_i")
    require_finite(omega_r, "omega_r")
    if p_m < 0.0:
        raise ValidationError(f"drive power must be >= 0 W, got {p_m!r}")
    if kappa_e <= 0.0:
        raise ValidationError(f"kappa_e must be > 0, got {kappa_e!r}")
    if kappa_i < 0.0:
        raise ValidationError(f"kappa_i must be >= 0, got {kappa_i!r}")
    if omega_r <= 0.0:
        raise ValidationError(f"omega_r must be > 0, got {omega_r!r}")
    total = kappa_e + kappa_i
    if total == 0.0:
        raise ValidationError("total loss kappa_e + kappa_i must be > 0")
    return 4.0 * kappa_e * p_m / (HBAR * omega_r * total**2)


def single_spin_coupling(b1_perp_avg: float, n_bar: float) -> float:
    """Vacuum coupling rate from the classical transverse field amplitude.

    ``b1_perp_avg`` is the sample-averaged |B1_perp| at photon number
    ``n_bar``; dividing by 2 sqrt(n_bar) converts the classical amplitude
    to the single-photon (vacuum) field.
    """
    require_finite(b1_perp_avg, "b1_perp_avg")
    require_finite(n_bar, "n_bar")
    if b1_perp_avg < 0.0:
        raise ValidationError("transverse field amplitude must be >= 0")
    if n_bar <= 0.0:
        raise ValidationError(
            f"single-spin coupling undefined at n_bar = {n_bar!r}"
        )
    return GAMMA_E * (b1_perp_avg / math.sqrt(2.0)) / (2.0 * math.sqrt(n_bar))


def ensemble_coupling(n_spins: float, g0: float) -> float:
    """Collective coupling sqrt(N) * g0 of N identically coupled spins."""
    require_finite(n_spins, "n_spins")
    require_finite(g0, "g0")
    if n_spins < 0:
        raise ValidationError(f"spin count must be >= 0, got {n_spins!r}")
    if g0 < 0.0:
        raise ValidationError(f"g0 must be >= 0, got {g0!r}")
    return math.sqrt(n_spins) * g0


def combined_coupling(couplings: np.ndarray) -> float:
    """Collective coupling of unequally coupled spins: sqrt(sum g_j^2)."""
    g = np.asarray(couplings, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValidationError("couplings must be a nonempty 1-D array")
    if not np.all(np.isfinite(g)):
        raise ValidationError("couplings must be finite")
    return float(np.sqrt(np.sum(g * g)))


def _field_energies(fmap: FieldMap) -> "tuple[np.ndarray, np.ndarray]":
    """Per-cell |B1|^2 and |B1_perp|^2."""
    perp2 = fmap.b1y**2 + fmap.b1z**2
    total2 = fmap.b1x**2 + perp2
    return total2, perp2


def filling_factor(fmap: FieldMap) -> float:
    """Fraction of transverse field energy stored inside the sample."""
    total2, perp2 = _field_energies(fmap)
    denom = float(np.sum(total2 * fmap.volume))
    if denom == 0.0:
        raise ValidationError("field map carries no field energy")
    num = float(np.sum(perp2[fmap.in_sample] * fmap.volume[fmap.in_sample]))
    return num / denom


def mode_volume(fmap: FieldMap) -> float:
    """Field-energy-weighted volume normalized to the peak field."""
    total2, _ = _field_energies(fmap)
    peak = float(np.max(total2))
    if peak == 0.0:
        raise ValidationError("field map carries no field energy")
    return float(np.sum(total2 * fmap.volume)) / peak


def sample_mean_transverse_field(fmap: FieldMap) -> float:
    """Volume-weighted mean |B1_perp| over the sample cells."""
    if not np.any(fmap.in_sample):
        raise ValidationError("field map marks no cells as sample")
    _, perp2 = _field_energies(fmap)
    v = fmap.volume[fmap.in_sample]
    return float(np.sum(np.sqrt(perp2[fmap.in_sample]) * v) / np.sum(v))


def coupling_pipeline(fmap: FieldMap) -> CouplingResult:
    """Full reduction of a field map to (g0, n_bar, eta, v_m)."""
    n_bar = mean_photon_number(
        fmap.drive_power, fmap.kappa_e, fmap.kappa_i, fmap.omega_r
    )
    g0 = single_spin_coupling(sample_mean_transverse_field(fmap), n_bar)
    return CouplingResult(
        g0=g0,
        n_bar=n_bar,
        eta=filling_factor(fmap),
        v_m=mode_volume(fmap),
    )
