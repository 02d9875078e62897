"""Shear-modulus reconstruction from time-harmonic Stokes data."""

__version__ = "0.1.0"
