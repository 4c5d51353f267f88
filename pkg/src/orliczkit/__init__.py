"""Orlicz-space numerics and operator analysis."""
__version__ = "0.1.0"
