"""Finite-scale theta-intermediate pressures of nonautonomous dynamical systems."""

__version__ = "0.1.0"
