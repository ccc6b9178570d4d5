"""Gmon two-qubit control toolkit: simulation, leakage bounds and optimisers."""

__version__ = "0.1.0"
