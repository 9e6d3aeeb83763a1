"""Isogeometric FSDT solver for variable-thickness plates."""

__version__ = "0.1.0"
