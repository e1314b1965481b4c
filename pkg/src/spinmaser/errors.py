"""Exception types shared across the package.

Every error that can surface at the command line carries an ``exit_code``
so the CLI can map failure modes to distinct process exit statuses:

* 2 — configuration / input-schema problems
* 3 — oscillation threshold reached (amplifier unstable)
* 4 — numerical non-convergence (fit or quadrature)
* 5 — measurement inconsistent with the physical model
"""

from __future__ import annotations

__all__ = [
    "SpinMaserError",
    "ValidationError",
    "ConfigError",
    "SchemaError",
    "OscillationThresholdError",
    "ConvergenceError",
    "ThresholdBoundaryError",
    "QuadratureError",
    "InconsistentMeasurementError",
]


class SpinMaserError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(SpinMaserError, ValueError):
    """A quantity or parameter violates its documented domain."""

    exit_code = 2


class ConfigError(SpinMaserError):
    """A run configuration is missing, malformed, or self-contradictory."""

    exit_code = 2


class SchemaError(ConfigError):
    """An input file does not match the expected column schema."""

    exit_code = 2


class OscillationThresholdError(SpinMaserError):
    """The spin emission rate reaches the total resonator loss.

    At kappa_s = kappa_e + kappa_i the amplifier denominator vanishes on
    resonance (onset of self-oscillation) and the steady-state response is
    undefined.
    """

    exit_code = 3

    def __init__(self, kappa_e: float, kappa_i: float, kappa_s: float):
        self.kappa_e = kappa_e
        self.kappa_i = kappa_i
        self.kappa_s = kappa_s
        super().__init__(
            "oscillation threshold: kappa_s = "
            f"{kappa_s:.6e} rad/s reaches kappa_e + kappa_i = "
            f"{kappa_e + kappa_i:.6e} rad/s"
        )


class ConvergenceError(SpinMaserError):
    """An iterative solver failed to converge."""

    exit_code = 4


class ThresholdBoundaryError(ConvergenceError):
    """A gain fit ran into the oscillation-threshold boundary.

    Distinct from plain non-convergence: the data demand a coupling at or
    beyond the instability, where the model cannot follow.
    """


class QuadratureError(SpinMaserError):
    """Adaptive quadrature did not reach the requested tolerance."""

    exit_code = 4


class InconsistentMeasurementError(SpinMaserError):
    """A measured value implies an unphysical state (e.g. n < vacuum)."""

    exit_code = 5
