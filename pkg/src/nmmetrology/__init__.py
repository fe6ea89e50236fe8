"""Quantum metrology of two atoms in a common non-Markovian Lorentzian bath."""

__version__ = "0.1.0"
