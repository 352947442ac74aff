"""Polarised single-photon bursts from an atom in a two-mode cavity."""

__version__ = "0.1.0"
