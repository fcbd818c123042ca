"""Spectral collaborative filtering on side-information-augmented graphs."""

__version__ = "0.1.0"
