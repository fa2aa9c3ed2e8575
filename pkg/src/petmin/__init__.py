"""Successive minima and height filtrations of Petersson lattices of cusp forms."""

__version__ = "0.1.0"
