"""Projective-simulation agents on a simulated linear-optical processor."""

__version__ = "0.1.0"
