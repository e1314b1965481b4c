"""Shared construction helpers for the test suite."""

import math

from spinmaser.quantities import hz_to_angular
from spinmaser.spins import LorentzianProfile, SpinEnsemble

MHZ = hz_to_angular(1e6)  # 2*pi * 1 MHz in rad/s
OMEGA_R = hz_to_angular(9.8e9)


def lorentzian_matched(kappa_s, fwhm, gamma, omega_s=OMEGA_R):
    """Lorentzian ensemble whose center emission rate is exactly kappa_s."""
    g_ens = math.sqrt(kappa_s * (fwhm + gamma)) / 2.0
    return SpinEnsemble(
        profile=LorentzianProfile(omega_s=omega_s, fwhm=fwhm),
        gamma=gamma,
        g_ens=g_ens,
    )
