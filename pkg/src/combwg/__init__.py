"""Comb waveguide design toolkit."""

__version__ = "0.1.0"
