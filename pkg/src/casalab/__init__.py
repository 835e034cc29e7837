"""Combinatorial ascending auction laboratory."""

__version__ = "0.1.0"
