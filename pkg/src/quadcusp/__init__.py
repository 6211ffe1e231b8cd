"""Cusp excursions and Diophantine approximation on rational quadrics."""

__version__ = "0.1.0"
