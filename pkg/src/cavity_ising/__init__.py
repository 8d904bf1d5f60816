"""Cavity-coupled transverse-field Ising chain: stationary states, bifurcations and quench dynamics."""

__version__ = "0.1.0"
