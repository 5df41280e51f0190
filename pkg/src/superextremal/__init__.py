"""Simulation and Monte Carlo verification of superextremal processes."""

__version__ = "0.1.0"
