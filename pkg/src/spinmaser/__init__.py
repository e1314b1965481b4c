"""Input-output modeling of spin-ensemble maser amplifiers and coolers."""

__version__ = "0.1.0"
