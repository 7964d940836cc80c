"""Spectral laboratory for the periodic Benjamin-Ono equation."""

__version__ = "0.1.0"
