"""Numerical toolkit for surface-diffusion grooving in a half-space."""

__version__ = "0.1.0"
