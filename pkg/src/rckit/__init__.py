"""Randomized compiling toolkit: Pauli twirling, noisy simulation, cycle benchmarking."""

__version__ = "0.1.0"
