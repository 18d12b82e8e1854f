"""Pseudo-spectral simulator for slightly compressible barotropic Euler flow."""

__version__ = "0.1.0"
