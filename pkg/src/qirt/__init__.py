"""Quantum instrument resource toolkit."""

__version__ = "0.1.0"
