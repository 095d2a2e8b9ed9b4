"""Numerical engine for linear and multilinear Fourier integral operators."""

__version__ = "0.1.0"
