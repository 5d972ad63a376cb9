"""Quantum-metrology numerics: Fisher information, Cramer-Rao bounds, and
simulations of phase and absorption estimation with bosonic probes."""

__version__ = "0.1.0"
