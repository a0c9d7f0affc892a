"""Micromagnetic simulator for a nanoscale non-volatile spin-wave majority gate."""

__version__ = "0.1.0"
