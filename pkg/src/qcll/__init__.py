"""Quantum circuit-like learning: count-sketch models with an exact
statevector reference, trainers, datasets, and experiment runners."""

__version__ = "0.1.0"
