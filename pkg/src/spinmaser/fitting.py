"""Least-squares parameter extraction from measured traces.

One damped least-squares engine (Levenberg-Marquardt update, central-
difference Jacobians with steps of 1e-6 of each parameter's scale) backs
every fit: complex resonator reflection, gain curves over the collective
coupling, real lineshapes (single Gaussian or hyperfine triplet of
Lorentzians), and exponential decays.  Parameter uncertainties come from
the Jacobian Gram matrix at the optimum scaled by the residual variance.

Fits are deterministic: the same data and initialization produce
identical results bit for bit.  A fit that does not converge raises
:class:`ConvergenceError` rather than returning a half-trusted result.

Axes are angular frequency (rad/s), or seconds for decay traces; callers
with magnetic-field-axis spectra convert via the gyromagnetic ratio
before fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import (
    ConvergenceError,
    ThresholdBoundaryError,
    ValidationError,
)
from .response import ResonatorParams, reflection
from .spins import Profile, SpinEnsemble, effective_linewidth
from .response import Branch

__all__ = [
    "MIN_FIT_POINTS",
    "TraceKind",
    "ComplexTrace",
    "FitResult",
    "LineshapeModel",
    "EchoSummary",
    "fit_reflection",
    "fit_gain_curve",
    "fit_lineshape",
    "fit_exp_decay",
    "echo_reduce",
    "reflection_trace_model",
    "gaussian_peak",
    "triple_lorentzian",
    "exp_decay_model",
]

MIN_FIT_POINTS = 8


class TraceKind(Enum):
    """What a trace's values mean (and what its axis is)."""

    REFLECTION = "reflection"  # complex r(omega)
    GAIN_DB = "gain_db"  # 20 log10 |r| over omega
    REAL_SPECTRUM = "real_spectrum"  # real signal over omega
    DECAY = "decay"  # real signal over time


@dataclass(frozen=True, eq=False)
class ComplexTrace:
    """A measured trace: strictly increasing axis, one value per point.

    ``x`` is angular frequency in rad/s (time in s for decay traces).
    Values are complex for reflection traces and real otherwise.
    """

    x: np.ndarray
    values: np.ndarray
    kind: TraceKind

    def __post_init__(self):
        try:
            x = np.array(self.x, dtype=float)
            if self.kind is TraceKind.REFLECTION:
                values = np.array(self.values, dtype=complex)
            else:
                raw = np.asarray(self.values)
                if np.iscomplexobj(raw):
                    raise ValidationError(
                        f"{self.kind.value} trace values must be real"
                    )
                values = np.array(raw, dtype=float)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"trace values invalid for {self.kind.value}: {exc}") from exc
        if x.ndim != 1 or values.shape != x.shape or x.size == 0:
            raise ValidationError("trace needs matching 1-D axis and values")
        if not np.all(np.isfinite(x)):
            raise ValidationError("trace axis must be finite")
        if not np.all(np.isfinite(values)):
            raise ValidationError("trace values must be finite")
        if x.size > 1 and not np.all(np.diff(x) > 0.0):
            raise ValidationError("trace axis must be strictly increasing")
        x.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class FitResult:
    """Converged fit: estimates, one-standard-deviation uncertainties,
    residual norm, and the iteration count that produced them."""

    params: Dict[str, float]
    sigmas: Dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int


class LineshapeModel(Enum):
    GAUSSIAN = "gaussian"
    TRIPLE_LORENTZIAN = "triple_lorentzian"


@dataclass(frozen=True)
class EchoSummary:
    """Scalar reduction of a time-domain echo record."""

    amplitude: float  # signed extremum
    area: float  # signed trapezoid integral over the window


# --------------------------------------------------------------------------
# engine
# --------------------------------------------------------------------------


def _central_jacobian(
    fun: Callable[[np.ndarray], np.ndarray], p: np.ndarray, steps: np.ndarray
) -> np.ndarray:
    cols = []
    for i in range(p.size):
        dp = np.zeros_like(p)
        dp[i] = steps[i]
        cols.append((fun(p + dp) - fun(p - dp)) / (2.0 * steps[i]))
    return np.column_stack(cols)


def _levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    p0: np.ndarray,
    scales: np.ndarray,
    *,
    max_iter: int = 200,
    rel_step_tol: float = 1e-10,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int, bool]:
    """Damped least squares; returns (p, residual, jacobian, iters, ok).

    The damping factor grows tenfold until a step lowers the cost and
    shrinks tenfold after each acceptance.  Convergence is a relative
    step below ``rel_step_tol``; a stall at machine precision (no
    acceptable step, last accepted step already < 1e-6 relative) also
    counts as converged.
    """
    p = np.array(p0, dtype=float)
    if project is not None:
        p = project(p)
    scales = np.maximum(np.abs(np.asarray(scales, dtype=float)), 1e-300)
    r = np.asarray(fun(p), dtype=float)
    cost = float(r @ r)
    lam = 1e-3
    last_rel = math.inf
    converged = False
    iterations = 0
    jac = np.zeros((r.size, p.size))
    for iterations in range(1, max_iter + 1):
        jac = _central_jacobian(fun, p, 1e-6 * scales)
        grad = jac.T @ r
        normal = jac.T @ jac
        diag = np.diag(normal).copy()
        diag[diag <= 0.0] = 1.0
        accepted = False
        while lam < 1e14:
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_try = p + step
            if project is not None:
                p_try = project(p_try)
            r_try = np.asarray(fun(p_try), dtype=float)
            cost_try = float(r_try @ r_try)
            if np.isfinite(cost_try) and cost_try <= cost:
                last_rel = float(
                    np.max(np.abs(p_try - p) / np.maximum(np.abs(p), scales))
                )
                p, r, cost = p_try, r_try, cost_try
                lam = max(lam * 0.1, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = last_rel < 1e-6 or cost == 0.0
            break
        if last_rel < rel_step_tol:
            converged = True
            break
    return p, r, jac, iterations, converged


def _make_result(
    names: "list[str]",
    p: np.ndarray,
    r: np.ndarray,
    jac: np.ndarray,
    iterations: int,
) -> FitResult:
    dof = max(r.size - p.size, 1)
    variance = float(r @ r) / dof
    gram = jac.T @ jac
    cov = np.linalg.pinv(gram) * variance
    sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(
        params={n: float(v) for n, v in zip(names, p)},
        sigmas={n: float(s) for n, s in zip(names, sig)},
        residual_norm=float(np.linalg.norm(r)),
        converged=True,
        iterations=iterations,
    )


def _require_kind(trace: ComplexTrace, kind: TraceKind, op: str) -> None:
    if trace.kind is not kind:
        raise ValidationError(f"{op} needs a {kind.value} trace, got {trace.kind.value}")
    if trace.x.size < MIN_FIT_POINTS:
        raise ValidationError(
            f"{op} needs >= {MIN_FIT_POINTS} points, got {trace.x.size}"
        )


def _wrap_angle(phi: float) -> float:
    return math.remainder(phi, 2.0 * math.pi)


# --------------------------------------------------------------------------
# reflection fit
# --------------------------------------------------------------------------


def _reflection_model(
    omega: np.ndarray, omega_ref: float, p: np.ndarray
) -> np.ndarray:
    kappa_e, kappa_i, delta_r, amp, phi, tau = p
    kbar = 0.5 * (kappa_e + kappa_i)
    base = 1j * kappa_e / ((omega - omega_ref - delta_r) + 1j * kbar) - 1.0
    return amp * np.exp(1j * (phi + (omega - omega_ref) * tau)) * base


def reflection_trace_model(
    omega,
    kappa_e: float,
    kappa_i: float,
    omega_r: float,
    amp_scale: float,
    phase_offset: float,
    electrical_delay: float,
):
    """Line-plus-resonator reflection with the reported fit parameters:
    amp_scale * exp(i(phase_offset + omega*electrical_delay)) *
    (i kappa_e / (omega - omega_r + i kbar) - 1)."""
    w = np.asarray(omega, dtype=float)
    kbar = 0.5 * (kappa_e + kappa_i)
    base = 1j * kappa_e / ((w - omega_r) + 1j * kbar) - 1.0
    return amp_scale * np.exp(1j * (phase_offset + w * electrical_delay)) * base


def fit_reflection(trace: ComplexTrace) -> FitResult:
    """Fit a complex reflection trace to a single-dip resonator model.

    Model: amp_scale * exp(i(phase_offset + omega*electrical_delay)) *
    (i kappa_e / (omega - omega_r + i kbar) - 1).  Initialization takes
    the delay from the edge phase slopes, the center from the magnitude
    minimum, the half-sum of the rates from the half-depth dip width, and
    tries both assignments of the dip depth to the rate asymmetry.
    """
    _require_kind(trace, TraceKind.REFLECTION, "reflection fit")
    omega, r = trace.x, trace.values
    n = omega.size
    mag = np.abs(r)
    n_edge = max(n // 10, 4)
    edges = np.r_[0:n_edge, n - n_edge : n]
    # per-edge phase slopes; one fit across both edges would absorb the
    # resonance winding into the delay estimate
    slopes = []
    for sl in (slice(0, n_edge), slice(n - n_edge, n)):
        phase = np.unwrap(np.angle(r[sl]))
        slopes.append(np.polyfit(omega[sl], phase, 1)[0])
    tau0 = 0.5 * (slopes[0] + slopes[1])
    omega_ref = float(omega[n // 2])
    i_min = int(np.argmin(mag))
    if i_min < n_edge or i_min >= n - n_edge:
        raise ConvergenceError("reflection dip sits at the trace edge")
    amp0 = float(np.median(mag[edges]))
    if amp0 == 0.0:
        raise ConvergenceError("reflection trace has zero baseline")
    depth = float(mag[i_min] / amp0)
    if depth >= 0.99:
        raise ConvergenceError("no dip in reflection trace")
    power = (mag / amp0) ** 2
    level = 0.5 * (1.0 + depth * depth)
    below = np.nonzero(power <= level)[0]
    if below.size >= 2:
        width = float(omega[below[-1]] - omega[below[0]])
    else:
        width = float(omega[-1] - omega[0]) / 10.0
    kbar0 = max(width / 2.0, float(omega[1] - omega[0]))
    rot = r[edges] * np.exp(-1j * (omega[edges] - omega_ref) * tau0)
    phi0 = float(np.angle(np.mean(-rot)))
    delta0 = float(omega[i_min] - omega_ref)
    span = float(omega[-1] - omega[0])
    data = np.concatenate([r.real, r.imag])

    def residual(p: np.ndarray) -> np.ndarray:
        m = _reflection_model(omega, omega_ref, p)
        return np.concatenate([m.real, m.imag]) - data

    scales = np.array([kbar0, kbar0, span, amp0, 1.0, max(abs(tau0), 1.0 / span)])
    best = None
    for sign in (1.0, -1.0):
        ke0 = kbar0 * (1.0 + sign * depth)
        ki0 = 2.0 * kbar0 - ke0
        p0 = np.array([ke0, ki0, delta0, amp0, phi0, tau0])
        p, res, jac, iters, ok = _levenberg_marquardt(residual, p0, scales)
        if ok:
            cost = float(res @ res)
            if best is None or cost < best[0]:
                best = (cost, p, res, jac, iters)
    if best is None:
        raise ConvergenceError("reflection fit did not converge")
    _, p, res, jac, iters = best
    kappa_e, kappa_i, delta_r, amp, phi, tau = p
    if amp < 0.0:  # sign gauge: fold into the phase
        amp, phi = -amp, phi + math.pi
    if kappa_e <= 0.0 or kappa_i < 0.0:
        raise ConvergenceError(
            "reflection fit converged to unphysical loss rates"
        )
    result = _make_result(
        ["kappa_e", "kappa_i", "omega_r", "amp_scale", "phase_offset",
         "electrical_delay"],
        np.array([kappa_e, kappa_i, omega_ref + delta_r, amp,
                  _wrap_angle(phi - omega_ref * tau), tau]),
        res,
        jac,
        iters,
    )
    return result


# --------------------------------------------------------------------------
# gain-curve fit
# --------------------------------------------------------------------------


def fit_gain_curve(
    trace: ComplexTrace,
    res: ResonatorParams,
    profile: Profile,
    gamma: float,
) -> FitResult:
    """Fit the collective coupling g_ens to a measured gain trace (dB).

    Resonator rates and the line profile are fixed from prior fits; the
    coupling is the single free parameter, constrained below the
    oscillation threshold where the ensemble emission rate would reach
    the total resonator loss.  A best fit pinned at that boundary raises
    :class:`ThresholdBoundaryError`.
    """
    _require_kind(trace, TraceKind.GAIN_DB, "gain fit")
    grid, data = trace.x, trace.values
    gamma_eff = effective_linewidth(
        SpinEnsemble(profile=profile, gamma=gamma, g_ens=1.0)
    )
    g_threshold = math.sqrt(res.kappa_total * gamma_eff / 4.0)
    g_cap = g_threshold * (1.0 - 1e-6)

    def gain_db(g: float) -> np.ndarray:
        # even in g, and Jacobian probes may overshoot the cap by a step
        g = min(abs(g), g_cap)
        ens = SpinEnsemble(profile=profile, gamma=gamma, g_ens=g)
        refl = reflection(res, ens, Branch.AMPLIFY, grid)
        return 20.0 * np.log10(np.abs(refl))

    def residual(p: np.ndarray) -> np.ndarray:
        return gain_db(float(p[0])) - data

    def project(p: np.ndarray) -> np.ndarray:
        return np.clip(p, 0.0, g_cap)

    peak_db = float(np.max(data))
    if peak_db > 0.05:
        s = 10.0 ** (peak_db / 20.0)
        ks0 = (res.kappa_total * s - (res.kappa_e - res.kappa_i)) / (1.0 + s)
        ks0 = max(ks0, 1e-6 * res.kappa_total)
        g0 = math.sqrt(ks0 * gamma_eff) / 2.0
    else:
        g0 = 0.1 * g_threshold
    g0 = min(max(g0, 0.01 * g_threshold), 0.95 * g_threshold)
    p, r, jac, iters, ok = _levenberg_marquardt(
        residual,
        np.array([g0]),
        np.array([g_threshold]),
        project=project,
    )
    if not ok:
        raise ConvergenceError("gain fit did not converge")
    g_hat = float(p[0])
    if g_hat >= g_threshold * (1.0 - 1e-5):
        raise ThresholdBoundaryError(
            "gain fit pinned at the oscillation-threshold boundary "
            f"(g_ens = {g_hat:.6e} rad/s, threshold {g_threshold:.6e} rad/s)"
        )
    return _make_result(["g_ens"], p, r, jac, iters)


# --------------------------------------------------------------------------
# lineshape fits
# --------------------------------------------------------------------------


def gaussian_peak(x, center, sigma, amplitude, baseline):
    """Gaussian line on a flat baseline."""
    x = np.asarray(x, dtype=float)
    return baseline + amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def triple_lorentzian(x, center, splitting, w_m, w_0, w_p, a_m, a_0, a_p, base):
    """Three Lorentzians with a shared center spacing on a flat baseline.

    ``w_*`` are full widths at half maximum; ``a_*`` peak amplitudes of
    the low/middle/high component.
    """
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, base, dtype=float)
    for dx, w, a in [(-splitting, w_m, a_m), (0.0, w_0, a_0), (splitting, w_p, a_p)]:
        h = 0.5 * w
        out = out + a * h * h / ((x - center - dx) ** 2 + h * h)
    return out


def exp_decay_model(t, tau, amplitude, offset):
    """Single-exponential decay amplitude*exp(-t/tau) + offset."""
    t = np.asarray(t, dtype=float)
    return offset + amplitude * np.exp(-t / tau)


# initial guess for the hyperfine splitting of the triplet, rad/s
TRIPLET_SPLITTING_INIT = 2.0 * math.pi * 2.17e6


def fit_lineshape(trace: ComplexTrace, model: LineshapeModel) -> FitResult:
    """Fit a real spectrum to a Gaussian or a triplet of Lorentzians.

    The triplet shares one center and one splitting between adjacent
    peaks; each peak has its own full width and amplitude.  Widths are
    reported as positive numbers (the models are even in them); a
    degenerate zero width is a convergence failure.
    """
    _require_kind(trace, TraceKind.REAL_SPECTRUM, "lineshape fit")
    x, y = trace.x, trace.values
    if float(np.max(y) - np.min(y)) == 0.0:
        raise ConvergenceError("flat spectrum has no lineshape to fit")
    n_edge = max(x.size // 20, 4)
    base0 = float(np.median(np.r_[y[:n_edge], y[-n_edge:]]))
    dx = float(x[1] - x[0])
    if model is LineshapeModel.GAUSSIAN:
        i_pk = int(np.argmax(np.abs(y - base0)))
        amp0 = float(y[i_pk] - base0)
        c0 = float(x[i_pk])
        above = np.nonzero(np.abs(y - base0) >= 0.5 * abs(amp0))[0]
        if above.size >= 2:
            fwhm0 = float(x[above[-1]] - x[above[0]])
        else:
            fwhm0 = (x[-1] - x[0]) / 10.0
        s0 = max(fwhm0 / 2.3548, dx)

        def residual(p: np.ndarray) -> np.ndarray:
            return gaussian_peak(x, *p) - y

        names = ["center", "sigma", "amplitude", "baseline"]
        p0 = np.array([c0, s0, amp0, base0])
        scales = np.array([max(abs(c0), s0), s0, max(abs(amp0), 1e-30),
                           max(abs(base0), abs(amp0))])
        p, r, jac, iters, ok = _levenberg_marquardt(residual, p0, scales)
        if not ok:
            raise ConvergenceError("gaussian lineshape fit did not converge")
        p[1] = abs(p[1])
        if p[1] == 0.0:
            raise ConvergenceError("gaussian fit collapsed to zero width")
        return _make_result(names, p, r, jac, iters)

    i_pk = int(np.argmax(y))
    c0 = float(x[i_pk])
    split0 = TRIPLET_SPLITTING_INIT
    w0 = max(split0 / 2.0, 4.0 * dx)

    def amp_at(x0: float) -> float:
        return max(float(np.interp(x0, x, y) - base0), 1e-3 * abs(np.max(y) - base0))

    p0 = np.array(
        [c0, split0, w0, w0, w0,
         amp_at(c0 - split0), amp_at(c0), amp_at(c0 + split0), base0]
    )

    def residual(p: np.ndarray) -> np.ndarray:
        return triple_lorentzian(x, *p) - y

    peak_scale = max(abs(float(np.max(y) - base0)), 1e-30)
    scales = np.array(
        [max(abs(c0), split0), split0, w0, w0, w0,
         peak_scale, peak_scale, peak_scale, peak_scale]
    )
    p, r, jac, iters, ok = _levenberg_marquardt(residual, p0, scales)
    if not ok:
        raise ConvergenceError("triplet lineshape fit did not converge")
    names = ["center", "splitting", "fwhm_m1", "fwhm_0", "fwhm_p1",
             "amp_m1", "amp_0", "amp_p1", "baseline"]
    p[1] = abs(p[1])
    for k in (2, 3, 4):
        p[k] = abs(p[k])
        if p[k] == 0.0:
            raise ConvergenceError("triplet fit collapsed to zero width")
    return _make_result(names, p, r, jac, iters)


# --------------------------------------------------------------------------
# exponential decay fit
# --------------------------------------------------------------------------


def fit_exp_decay(trace: ComplexTrace) -> FitResult:
    """Fit amplitude * exp(-t/tau) + offset to a decay trace."""
    _require_kind(trace, TraceKind.DECAY, "decay fit")
    t, y = trace.x, trace.values
    if float(np.max(y) - np.min(y)) == 0.0:
        raise ConvergenceError("flat trace has no decay to fit")
    n_tail = max(t.size // 10, 4)
    c0 = float(np.mean(y[-n_tail:]))
    a0 = float(y[0] - c0)
    if a0 == 0.0:
        raise ConvergenceError("no decaying envelope in trace")
    target = c0 + a0 / math.e
    if a0 > 0:
        idx = np.nonzero(y <= target)[0]
    else:
        idx = np.nonzero(y >= target)[0]
    tau0 = float(t[idx[0]]) if idx.size and idx[0] > 0 else float(t[-1]) / 3.0
    tau0 = max(tau0, float(t[1] - t[0]))

    def residual(p: np.ndarray) -> np.ndarray:
        return p[2] + p[1] * np.exp(-t / p[0]) - y

    scales = np.array([tau0, abs(a0), max(abs(c0), abs(a0))])
    p, r, jac, iters, ok = _levenberg_marquardt(
        residual, np.array([tau0, a0, c0]), scales
    )
    if not ok:
        raise ConvergenceError("decay fit did not converge")
    if p[0] <= 0.0:
        raise ConvergenceError(
            f"decay fit produced non-positive time constant {p[0]!r}"
        )
    return _make_result(["tau", "amplitude", "offset"], p, r, jac, iters)


# --------------------------------------------------------------------------
# echo reduction
# --------------------------------------------------------------------------


def echo_reduce(
    time: np.ndarray,
    signal: np.ndarray,
    window: "Optional[tuple[float, float]]" = None,
) -> EchoSummary:
    """Reduce a baseline-corrected echo record to amplitude and area.

    Amplitude is the signed extremum; area is the trapezoid integral over
    ``window`` (whole record when omitted).  The sign carries physics
    (inverted ensembles flip the echo), so neither is folded to |.|.
    """
    t = np.asarray(time, dtype=float)
    y = np.asarray(signal, dtype=float)
    if t.ndim != 1 or y.shape != t.shape or t.size < 2:
        raise ValidationError("echo record needs matching 1-D arrays (>= 2 points)")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ValidationError("echo record must be finite")
    if not np.all(np.diff(t) > 0.0):
        raise ValidationError("echo time axis must be strictly increasing")
    if window is None:
        lo, hi = float(t[0]), float(t[-1])
    else:
        lo, hi = float(window[0]), float(window[1])
        if lo >= hi:
            raise ValidationError("echo window must have positive length")
        if lo < t[0] or hi > t[-1]:
            raise ValidationError("echo window lies outside the record")
    mask = (t >= lo) & (t <= hi)
    if np.count_nonzero(mask) < 2:
        raise ValidationError("echo window contains fewer than 2 samples")
    amplitude = float(y[int(np.argmax(np.abs(y)))])
    area = float(np.trapezoid(y[mask], t[mask]))
    return EchoSummary(amplitude=amplitude, area=area)
