"""Pressure reconstruction from pressure-gradient samples."""
__version__ = "0.1.0"
