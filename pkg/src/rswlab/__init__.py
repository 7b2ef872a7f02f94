"""Numerical laboratory for the 1D rotating shallow water equations."""

__version__ = "0.1.0"
