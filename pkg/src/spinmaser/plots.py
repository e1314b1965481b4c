"""Figure rendering for the command-line report path.

Uses the headless Agg backend and writes PNGs atomically (temp file +
rename) next to the delimited outputs.  Figures are companions to the
CSV/JSON artifacts, not replacements: every plotted quantity is also in
the data files.
"""

from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["save_spectra_figure", "save_trace_fit_figure"]


def _atomic_savefig(fig, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=150)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    finally:
        plt.close(fig)


def save_spectra_figure(
    path: str,
    omega_hz: np.ndarray,
    gain_db: np.ndarray,
    r_in: np.ndarray,
    r_s: np.ndarray,
    r_i: np.ndarray,
    n_out: np.ndarray,
    title: str,
) -> None:
    """Two-panel sweep report: gain on top, bath weights and output noise
    below (noise on a twin axis)."""
    center = float(omega_hz[omega_hz.size // 2])
    detuning_mhz = (np.asarray(omega_hz) - center) / 1e6
    fig, (ax_gain, ax_noise) = plt.subplots(
        2, 1, figsize=(7.0, 7.0), sharex=True, constrained_layout=True
    )
    ax_gain.plot(detuning_mhz, gain_db, color="C0")
    ax_gain.set_ylabel("gain (dB)")
    ax_gain.axhline(0.0, color="0.7", lw=0.8)
    ax_gain.set_title(title)

    ax_noise.plot(detuning_mhz, r_in, label="input weight", color="C0")
    ax_noise.plot(detuning_mhz, r_s, label="spin weight", color="C1")
    ax_noise.plot(detuning_mhz, r_i, label="internal weight", color="C2")
    ax_noise.set_xlabel(f"detuning from {center / 1e9:g} GHz (MHz)")
    ax_noise.set_ylabel("bath weight")
    twin = ax_noise.twinx()
    twin.plot(detuning_mhz, n_out, label="output noise", color="C3", ls="--")
    twin.set_ylabel("output noise (photons)")
    handles, labels = ax_noise.get_legend_handles_labels()
    h2, l2 = twin.get_legend_handles_labels()
    ax_noise.legend(handles + h2, labels + l2, loc="best", fontsize="small")
    _atomic_savefig(fig, path)


def save_trace_fit_figure(
    path: str,
    x: np.ndarray,
    data: np.ndarray,
    model: np.ndarray,
    xlabel: str,
    ylabel: str,
    title: str,
) -> None:
    """Measured points with the fitted model curve overlaid."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5), constrained_layout=True)
    ax.plot(x, data, ".", ms=3, color="C0", label="data")
    ax.plot(x, model, "-", color="C3", label="fit")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    _atomic_savefig(fig, path)
