"""Parallel-lives simulation engine with a standard quantum-mechanics oracle."""

__version__ = "0.1.0"
